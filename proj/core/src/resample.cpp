#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fxprof/audio.hpp"

namespace fxprof {
namespace {

// Kernel half-width in zero crossings of the lower of the two rates (32 taps).
constexpr double kHalfTaps = 16.0;
constexpr double kKaiserBeta = 8.0;
constexpr double kRolloff = 0.95;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double kaiser(double x, double i0_beta) {
  // x in [-1, 1]
  const double r = 1.0 - x * x;
  if (r <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(r)) / i0_beta;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_sr) {
  if (target_sr <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (target_sr == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_sr) / static_cast<double>(clip.sample_rate);
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) * ratio));
  const double scale = std::min(1.0, ratio);  // cutoff relative to the input Nyquist
  const double cutoff = kRolloff * scale;
  const double half_width = kHalfTaps / scale;  // in input samples
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  const auto n_in = static_cast<std::ptrdiff_t>(clip.size());

  AudioClip out{std::vector<float>(out_len), target_sr};
  for (std::size_t j = 0; j < out_len; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    double wsum = 0.0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double d = t - static_cast<double>(i);
      const double w = cutoff * sinc(cutoff * d) * kaiser(d / half_width, i0_beta);
      acc += w * clip.samples[static_cast<std::size_t>(i)];
      wsum += w;
    }
    // Normalizing by the tap sum keeps DC exact, including near the edges.
    out.samples[j] = wsum != 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
  }
  return out;
}

}  // namespace fxprof
