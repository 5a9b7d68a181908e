#include "fxprof/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fxprof/random.hpp"

namespace fxprof::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void normalize(std::vector<double>& x) {
  double acc = 0.0, peak = 0.0;
  for (double v : x) {
    acc += v * v;
    peak = std::max(peak, std::abs(v));
  }
  if (acc == 0.0) return;
  double g = kCorpusRms / std::sqrt(acc / static_cast<double>(x.size()));
  if (peak * g > 0.99) g = 0.99 / peak;
  for (double& v : x) v *= g;
}

AudioClip to_clip(const std::vector<double>& x, int sr) {
  AudioClip c{std::vector<float>(x.size()), sr};
  std::transform(x.begin(), x.end(), c.samples.begin(), [](double v) { return static_cast<float>(v); });
  return c;
}

double midi_hz(double note) { return 440.0 * std::pow(2.0, (note - 69.0) / 12.0); }

// Decaying harmonic note added into x starting at sample `start`.
void add_note(std::vector<double>& x, std::size_t start, double f0, double amp, double tau_s,
              double brightness, int sr, Rng& rng) {
  const double nyq = 0.5 * sr;
  const std::size_t len = std::min(x.size() - start, static_cast<std::size_t>(5.0 * tau_s * sr));
  const double attack = 0.004 * sr;
  for (int h = 1; h <= 12; ++h) {
    const double f = f0 * h;
    if (f >= 0.9 * nyq) break;
    const double a = amp * std::pow(static_cast<double>(h), -brightness);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double tau_h = tau_s / (1.0 + 0.3 * (h - 1));  // upper partials die first
    for (std::size_t n = 0; n < len; ++n) {
      const double t = static_cast<double>(n) / sr;
      const double env = std::min(1.0, static_cast<double>(n) / attack) * std::exp(-t / tau_h);
      x[start + n] += a * env * std::sin(kTwoPi * f * t + phase);
    }
  }
}

void add_drum(std::vector<double>& x, std::size_t start, bool kick, int sr, Rng& rng) {
  const std::size_t len = std::min(x.size() - start, static_cast<std::size_t>(0.3 * sr));
  double phase = 0.0;
  double lp = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / sr;
    if (kick) {
      const double f = 50.0 + 120.0 * std::exp(-t / 0.03);
      phase += kTwoPi * f / sr;
      x[start + n] += 0.9 * std::exp(-t / 0.12) * std::sin(phase);
    } else {
      const double w = rng.uniform(-1.0, 1.0);
      lp += 0.5 * (w - lp);
      x[start + n] += 0.5 * std::exp(-t / 0.05) * (w - lp);  // high-passed noise burst
    }
  }
}

}  // namespace

std::optional<CorpusKind> parse_corpus_kind(std::string_view name) {
  if (name == "tones") return CorpusKind::Tones;
  if (name == "mix") return CorpusKind::Mix;
  return std::nullopt;
}

AudioClip synth_tones(std::uint64_t seed, double seconds, int sr) {
  Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(seconds * sr), 0.0);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * sr);
  while (pos < x.size()) {
    const double note = std::floor(rng.uniform(40.0, 76.0));
    add_note(x, pos, midi_hz(note), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.2), rng.uniform(0.8, 1.6), sr,
             rng);
    pos += static_cast<std::size_t>(rng.uniform(0.4, 1.2) * sr);
  }
  normalize(x);
  return to_clip(x, sr);
}

AudioClip synth_mix(std::uint64_t seed, double seconds, int sr) {
  Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(seconds * sr), 0.0);
  const double beat = rng.uniform(0.4, 0.6);  // seconds per beat
  const auto beat_n = static_cast<std::size_t>(beat * sr);
  for (std::size_t b = 0, pos = 0; pos < x.size(); ++b, pos += beat_n) {
    add_drum(x, pos, b % 2 == 0, sr, rng);
    if (b % 2 == 0) {
      const double root = std::floor(rng.uniform(48.0, 64.0));
      for (double iv : {0.0, 4.0, 7.0, 11.0}) {
        add_note(x, pos, midi_hz(root + iv), 0.25, rng.uniform(0.6, 1.2), 0.7, sr, rng);
      }
      add_note(x, pos, midi_hz(root - 24.0), 0.6, 0.8, 1.2, sr, rng);
    }
  }
  for (double& v : x) v += 0.02 * rng.normal();  // broadband floor
  normalize(x);
  return to_clip(x, sr);
}

void write_synthetic_corpus(const std::filesystem::path& dir, CorpusKind kind, std::size_t n_files,
                            double seconds, int sample_rate, std::uint64_t seed) {
  if (n_files == 0) throw std::invalid_argument("corpus needs at least one file");
  if (!(seconds > 0.0)) throw std::invalid_argument("clip duration must be positive");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < n_files; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    const AudioClip clip = kind == CorpusKind::Tones ? synth_tones(s, seconds, sample_rate)
                                                     : synth_mix(s, seconds, sample_rate);
    char name[32];
    std::snprintf(name, sizeof name, "clip_%03zu.wav", i);
    save_wav(clip, dir / name);
  }
}

}  // namespace fxprof::data
