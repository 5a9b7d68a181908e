#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "fxprof/tape.hpp"

namespace fxprof::train {

enum class LossKind { LogcoshTime, LogcoshSpec, LogSnr };

std::optional<LossKind> parse_loss_kind(std::string_view name);
std::string_view loss_name(LossKind kind);

inline constexpr double kLogSnrEps = 1e-12;
/// Spectral loss frame size; the magnitude floor keeps sqrt differentiable.
inline constexpr std::size_t kDefaultSpecFft = 512;
inline constexpr double kMagnitudeEps = 1e-12;

/// Mean log(cosh(pred - target)).
double loss_logcosh_time(std::span<const double> pred, std::span<const double> target);
double loss_logcosh_time(std::span<const float> pred, std::span<const float> target);

/// Mean log-cosh between DFT magnitudes of rectangular frames (hop fft/2).
double loss_logcosh_spec(std::span<const double> pred, std::span<const double> target,
                         std::size_t fft_size);
double loss_logcosh_spec(std::span<const float> pred, std::span<const float> target,
                         std::size_t fft_size);

/// -10 log10((sum target^2 + eps) / (sum (pred - target)^2 + eps)).
double loss_logsnr(std::span<const double> pred, std::span<const double> target);
double loss_logsnr(std::span<const float> pred, std::span<const float> target);

/// Records the chosen loss over batch x length signals (one row per
/// example). Time-domain log-cosh and the spectral loss average over every
/// element; log-SNR averages the per-example values.
template <typename T>
grad::Var record_loss(grad::Tape<T>& tape, LossKind kind, grad::Var pred, grad::Var target,
                      std::size_t fft_size = kDefaultSpecFft);

}  // namespace fxprof::train
