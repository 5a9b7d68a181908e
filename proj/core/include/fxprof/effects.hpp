#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fxprof/audio.hpp"

namespace fxprof::fx {

enum class EffectId { Comp4c, Echo, Tremolo, Chorus };

inline constexpr std::array<EffectId, 4> kAllEffects = {EffectId::Comp4c, EffectId::Echo,
                                                        EffectId::Tremolo, EffectId::Chorus};

std::string_view effect_name(EffectId id);
std::optional<EffectId> parse_effect(std::string_view name);
/// "comp4c, echo, tremolo, chorus"
std::string valid_effect_names();

struct KnobSpec {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  std::string units;
};

/// Normalized control setting, one value in [-0.5, 0.5] per knob.
struct KnobVector {
  std::vector<double> values;
};

inline constexpr double kKnobLow = -0.5;
inline constexpr double kKnobHigh = 0.5;

double denormalize(const KnobSpec& spec, double normalized);
double normalize(const KnobSpec& spec, double physical);

class EffectInstance {
 public:
  /// Default knob ranges for the given effect.
  static EffectInstance make(EffectId id, int sample_rate);
  EffectInstance(EffectId id, std::vector<KnobSpec> knobs, int sample_rate);

  EffectId id() const noexcept { return id_; }
  const std::vector<KnobSpec>& knobs() const noexcept { return knobs_; }
  std::size_t knob_count() const noexcept { return knobs_.size(); }
  int sample_rate() const noexcept { return sample_rate_; }
  std::optional<std::size_t> knob_index(std::string_view name) const;

  /// Maps physical values (knob order) to a normalized vector; throws when a
  /// value lies outside its knob range.
  KnobVector normalize_physical(const std::vector<double>& physical) const;

  bool operator==(const EffectInstance&) const = default;

 private:
  EffectId id_;
  std::vector<KnobSpec> knobs_;
  int sample_rate_;
};

inline bool operator==(const KnobSpec& a, const KnobSpec& b) {
  return a.name == b.name && a.min == b.min && a.max == b.max && a.units == b.units;
}

// Tremolo rate range in Hz; chorus rates are these divided by kChorusRateDivisor.
inline constexpr double kTremoloRateMin = 0.5;
inline constexpr double kTremoloRateMax = 50.0;
inline constexpr double kChorusRateDivisor = 8.0;

AudioClip compress(const AudioClip& x, double threshold_db, double ratio, double attack_ms,
                   double release_ms);
AudioClip echo(const AudioClip& x, double delay_ms, double feedback, double mix);
AudioClip tremolo(const AudioClip& x, double rate_hz, double depth);
AudioClip chorus(const AudioClip& x, double rate_hz, double depth_ms, double center_ms, double mix);

/// Steady-state compressor gain in dB for a detector level in dBFS.
double static_gain_db(double level_db, double threshold_db, double ratio);

/// Denormalizes the knob vector and dispatches to the matching oracle.
AudioClip apply_effect(const EffectInstance& fx, const KnobVector& knobs, const AudioClip& x);

/// Warm-up length discarded in front of each dataset chunk: twice the longest
/// time constant (or delay) the effect can exhibit, in samples.
std::size_t default_context_len(const EffectInstance& fx);

}  // namespace fxprof::fx
