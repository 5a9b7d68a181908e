#include "fxprof/effects.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace fxprof::fx {

std::string_view effect_name(EffectId id) {
  switch (id) {
    case EffectId::Comp4c: return "comp4c";
    case EffectId::Echo: return "echo";
    case EffectId::Tremolo: return "tremolo";
    case EffectId::Chorus: return "chorus";
  }
  return "unknown";
}

std::optional<EffectId> parse_effect(std::string_view name) {
  for (EffectId id : kAllEffects) {
    if (effect_name(id) == name) return id;
  }
  return std::nullopt;
}

std::string valid_effect_names() {
  std::string out;
  for (EffectId id : kAllEffects) {
    if (!out.empty()) out += ", ";
    out += effect_name(id);
  }
  return out;
}

namespace {

std::size_t make_count(EffectId id) {
  switch (id) {
    case EffectId::Comp4c: return 4;
    case EffectId::Echo: return 3;
    case EffectId::Tremolo: return 2;
    case EffectId::Chorus: return 4;
  }
  return 0;
}

}  // namespace

double denormalize(const KnobSpec& spec, double v) {
  return spec.min + (v - kKnobLow) * (spec.max - spec.min);
}

double normalize(const KnobSpec& spec, double physical) {
  return (physical - spec.min) / (spec.max - spec.min) + kKnobLow;
}

EffectInstance EffectInstance::make(EffectId id, int sample_rate) {
  std::vector<KnobSpec> knobs;
  switch (id) {
    case EffectId::Comp4c:
      knobs = {{"threshold", -30.0, 0.0, "dB"},
               {"ratio", 1.0, 10.0, "ratio"},
               {"attack", 1.0, 100.0, "ms"},
               {"release", 10.0, 1000.0, "ms"}};
      break;
    case EffectId::Echo:
      knobs = {{"delay", 10.0, 500.0, "ms"},
               {"feedback", 0.0, 0.9, "fraction"},
               {"mix", 0.0, 1.0, "fraction"}};
      break;
    case EffectId::Tremolo:
      knobs = {{"rate", kTremoloRateMin, kTremoloRateMax, "Hz"}, {"depth", 0.0, 1.0, "fraction"}};
      break;
    case EffectId::Chorus:
      knobs = {{"rate", kTremoloRateMin / kChorusRateDivisor, kTremoloRateMax / kChorusRateDivisor,
                "Hz"},
               {"depth", 0.0, 5.0, "ms"},
               {"center", 5.0, 30.0, "ms"},
               {"mix", 0.0, 1.0, "fraction"}};
      break;
  }
  return EffectInstance(id, std::move(knobs), sample_rate);
}

EffectInstance::EffectInstance(EffectId id, std::vector<KnobSpec> knobs, int sample_rate)
    : id_(id), knobs_(std::move(knobs)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw std::invalid_argument("effect sample rate must be positive");
  const std::size_t expected = make_count(id);
  if (knobs_.size() != expected) {
    throw std::invalid_argument(std::string(effect_name(id)) + " expects " +
                                std::to_string(expected) + " knobs, got " +
                                std::to_string(knobs_.size()));
  }
  std::unordered_set<std::string> names;
  for (const auto& k : knobs_) {
    if (!(k.min < k.max)) throw std::invalid_argument("knob '" + k.name + "': min must be < max");
    if (!names.insert(k.name).second) throw std::invalid_argument("duplicate knob '" + k.name + "'");
  }
}

std::optional<std::size_t> EffectInstance::knob_index(std::string_view name) const {
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    if (knobs_[i].name == name) return i;
  }
  return std::nullopt;
}

KnobVector EffectInstance::normalize_physical(const std::vector<double>& physical) const {
  if (physical.size() != knobs_.size()) {
    throw std::invalid_argument(std::string(effect_name(id_)) + " takes " +
                                std::to_string(knobs_.size()) + " knob values, got " +
                                std::to_string(physical.size()));
  }
  KnobVector kv;
  for (std::size_t i = 0; i < physical.size(); ++i) {
    const auto& k = knobs_[i];
    if (physical[i] < k.min || physical[i] > k.max) {
      throw std::invalid_argument("knob '" + k.name + "' value " + std::to_string(physical[i]) +
                                  " outside [" + std::to_string(k.min) + ", " +
                                  std::to_string(k.max) + "] " + k.units);
    }
    kv.values.push_back(std::clamp(normalize(k, physical[i]), kKnobLow, kKnobHigh));
  }
  return kv;
}

namespace {

double ms_to_samples(double ms, int sr) { return ms * static_cast<double>(sr) / 1000.0; }

}  // namespace

double static_gain_db(double level_db, double threshold_db, double ratio) {
  return std::min(0.0, threshold_db + (level_db - threshold_db) / ratio - level_db);
}

AudioClip compress(const AudioClip& x, double threshold_db, double ratio, double attack_ms,
                   double release_ms) {
  if (!(ratio >= 1.0)) throw std::invalid_argument("compress: ratio must be >= 1");
  if (!(attack_ms > 0.0) || !(release_ms > 0.0)) {
    throw std::invalid_argument("compress: attack and release must be positive");
  }
  const double a_att = std::exp(-1.0 / ms_to_samples(attack_ms, x.sample_rate));
  const double a_rel = std::exp(-1.0 / ms_to_samples(release_ms, x.sample_rate));
  AudioClip y{std::vector<float>(x.size()), x.sample_rate};
  double env = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double in = x.samples[n];
    const double mag = std::abs(in);
    const double a = mag > env ? a_att : a_rel;
    env = a * env + (1.0 - a) * mag;
    const double level = 20.0 * std::log10(std::max(env, 1e-8));
    const double gain_db = static_gain_db(level, threshold_db, ratio);
    y.samples[n] = static_cast<float>(in * std::pow(10.0, gain_db / 20.0));
  }
  return y;
}

AudioClip echo(const AudioClip& x, double delay_ms, double feedback, double mix) {
  if (!(feedback >= 0.0 && feedback < 1.0)) {
    throw std::invalid_argument("echo: feedback must be in [0, 1)");
  }
  if (!(mix >= 0.0 && mix <= 1.0)) throw std::invalid_argument("echo: mix must be in [0, 1]");
  const auto delay = static_cast<std::size_t>(std::llround(ms_to_samples(delay_ms, x.sample_rate)));
  if (delay < 1) throw std::invalid_argument("echo: delay shorter than one sample");
  std::vector<double> wet(x.size(), 0.0);
  AudioClip y{std::vector<float>(x.size()), x.sample_rate};
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (n >= delay) wet[n] = x.samples[n - delay] + feedback * wet[n - delay];
    y.samples[n] = static_cast<float>((1.0 - mix) * x.samples[n] + mix * wet[n]);
  }
  return y;
}

AudioClip tremolo(const AudioClip& x, double rate_hz, double depth) {
  if (!(depth >= 0.0 && depth <= 1.0)) throw std::invalid_argument("tremolo: depth must be in [0, 1]");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("tremolo: rate must be positive");
  const double w = 2.0 * std::numbers::pi * rate_hz / static_cast<double>(x.sample_rate);
  AudioClip y{std::vector<float>(x.size()), x.sample_rate};
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double mod = (1.0 - depth) + depth * (0.5 + 0.5 * std::cos(w * static_cast<double>(n)));
    y.samples[n] = static_cast<float>(x.samples[n] * mod);
  }
  return y;
}

AudioClip chorus(const AudioClip& x, double rate_hz, double depth_ms, double center_ms,
                 double mix) {
  const double depth = ms_to_samples(depth_ms, x.sample_rate);
  const double center = ms_to_samples(center_ms, x.sample_rate);
  if (depth < 0.0 || center - depth < 0.0) {
    throw std::invalid_argument("chorus: center - depth must be >= 0 (negative delay)");
  }
  if (!(mix >= 0.0 && mix <= 1.0)) throw std::invalid_argument("chorus: mix must be in [0, 1]");
  if (rate_hz < 0.0) throw std::invalid_argument("chorus: rate must be >= 0");
  const double w = 2.0 * std::numbers::pi * rate_hz / static_cast<double>(x.sample_rate);
  auto at = [&](std::ptrdiff_t i) -> double {
    return i < 0 ? 0.0 : static_cast<double>(x.samples[static_cast<std::size_t>(i)]);
  };
  AudioClip y{std::vector<float>(x.size()), x.sample_rate};
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double d = center + depth * std::sin(w * static_cast<double>(n));
    const double pos = static_cast<double>(n) - d;
    const double base = std::floor(pos);
    const double frac = pos - base;
    const auto i = static_cast<std::ptrdiff_t>(base);
    // frac == 0 must not touch x[n + 1].
    const double wet = frac == 0.0 ? at(i) : (1.0 - frac) * at(i) + frac * at(i + 1);
    y.samples[n] = static_cast<float>((1.0 - mix) * x.samples[n] + mix * wet);
  }
  return y;
}

AudioClip apply_effect(const EffectInstance& fx, const KnobVector& knobs, const AudioClip& x) {
  if (knobs.values.size() != fx.knob_count()) {
    throw std::invalid_argument("apply_effect: " + std::string(effect_name(fx.id())) + " takes " +
                                std::to_string(fx.knob_count()) + " knobs, got " +
                                std::to_string(knobs.values.size()));
  }
  if (x.sample_rate != fx.sample_rate()) {
    throw std::invalid_argument("apply_effect: clip rate " + std::to_string(x.sample_rate) +
                                " != effect rate " + std::to_string(fx.sample_rate()));
  }
  std::vector<double> p(knobs.values.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = knobs.values[i];
    if (!(v >= kKnobLow && v <= kKnobHigh)) {
      throw std::invalid_argument("apply_effect: knob value outside [-0.5, 0.5]");
    }
    p[i] = denormalize(fx.knobs()[i], v);
  }
  switch (fx.id()) {
    case EffectId::Comp4c: return compress(x, p[0], p[1], p[2], p[3]);
    case EffectId::Echo: return echo(x, p[0], p[1], p[2]);
    case EffectId::Tremolo: return tremolo(x, p[0], p[1]);
    case EffectId::Chorus: return chorus(x, p[0], p[1], p[2], p[3]);
  }
  throw std::invalid_argument("apply_effect: unknown effect");
}

std::size_t default_context_len(const EffectInstance& fx) {
  double ms = 0.0;
  const auto& k = fx.knobs();
  switch (fx.id()) {
    case EffectId::Comp4c: ms = 2.0 * k[3].max; break;
    case EffectId::Echo: ms = 2.0 * k[0].max; break;
    case EffectId::Tremolo: ms = 0.0; break;
    case EffectId::Chorus: ms = 2.0 * (k[2].max + k[1].max); break;
  }
  return static_cast<std::size_t>(std::llround(ms_to_samples(ms, fx.sample_rate())));
}

}  // namespace fxprof::fx
