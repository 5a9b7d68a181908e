#include "fxprof/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxprof/model.hpp"
#include "fxprof/ops.hpp"

namespace fxprof::train {
namespace {

template <typename T>
void check_lengths(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss: prediction has " + std::to_string(pred.size()) +
                                " samples, target " + std::to_string(target.size()));
  }
  if (pred.empty()) throw std::invalid_argument("loss: empty input");
}

void check_fft(std::size_t fft_size, std::size_t length) {
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0) {
    throw std::invalid_argument("spectral loss: fft size " + std::to_string(fft_size) +
                                " is not a power of two");
  }
  if (fft_size > length) {
    throw std::invalid_argument("spectral loss: fft size " + std::to_string(fft_size) +
                                " exceeds signal length " + std::to_string(length));
  }
}

template <typename T>
double logcosh_time_impl(std::span<const T> pred, std::span<const T> target) {
  check_lengths(pred, target);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += grad::log_cosh(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
double logsnr_impl(std::span<const T> pred, std::span<const T> target) {
  check_lengths(pred, target);
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double t = target[i];
    const double e = static_cast<double>(pred[i]) - t;
    sig += t * t;
    err += e * e;
  }
  return -10.0 * std::log10((sig + kLogSnrEps) / (err + kLogSnrEps));
}

template <typename T>
double logcosh_spec_impl(std::span<const T> pred, std::span<const T> target, std::size_t fft_size) {
  check_lengths(pred, target);
  check_fft(fft_size, pred.size());
  grad::Tensor2d p(1, pred.size()), t(1, target.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[i] = pred[i];
    t[i] = target[i];
  }
  grad::Tape<double> tape;
  const auto out = record_loss(tape, LossKind::LogcoshSpec, tape.constant(std::move(p)),
                               tape.constant(std::move(t)), fft_size);
  return tape.value(out)[0];
}

}  // namespace

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  if (name == "logcosh_time") return LossKind::LogcoshTime;
  if (name == "logcosh_spec") return LossKind::LogcoshSpec;
  if (name == "logsnr") return LossKind::LogSnr;
  return std::nullopt;
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::LogcoshTime: return "logcosh_time";
    case LossKind::LogcoshSpec: return "logcosh_spec";
    case LossKind::LogSnr: return "logsnr";
  }
  return "unknown";
}

double loss_logcosh_time(std::span<const double> p, std::span<const double> t) { return logcosh_time_impl(p, t); }
double loss_logcosh_time(std::span<const float> p, std::span<const float> t) { return logcosh_time_impl(p, t); }
double loss_logsnr(std::span<const double> p, std::span<const double> t) { return logsnr_impl(p, t); }
double loss_logsnr(std::span<const float> p, std::span<const float> t) { return logsnr_impl(p, t); }
double loss_logcosh_spec(std::span<const double> p, std::span<const double> t, std::size_t fft) {
  return logcosh_spec_impl(p, t, fft);
}
double loss_logcosh_spec(std::span<const float> p, std::span<const float> t, std::size_t fft) {
  return logcosh_spec_impl(p, t, fft);
}

template <typename T>
grad::Var record_loss(grad::Tape<T>& tape, LossKind kind, grad::Var pred, grad::Var target,
                      std::size_t fft_size) {
  switch (kind) {
    case LossKind::LogcoshTime:
      return tape.logcosh_mean(pred, target);
    case LossKind::LogSnr:
      return tape.logsnr(pred, target, static_cast<T>(kLogSnrEps));
    case LossKind::LogcoshSpec: {
      check_fft(fft_size, tape.value(pred).cols());
      auto [re_w, im_w] = model::dft_weights<T>(fft_size);
      const auto re = tape.constant(std::move(re_w));
      const auto im = tape.constant(std::move(im_w));
      const std::size_t hop = fft_size / 2;
      const auto eps = static_cast<T>(kMagnitudeEps);
      const auto mp = tape.magnitude(tape.framed_transform(pred, re, hop), tape.framed_transform(pred, im, hop), eps);
      const auto mt =
          tape.magnitude(tape.framed_transform(target, re, hop), tape.framed_transform(target, im, hop), eps);
      return tape.logcosh_mean(mp, mt);
    }
  }
  throw std::invalid_argument("unknown loss kind");
}

template grad::Var record_loss(grad::Tape<float>&, LossKind, grad::Var, grad::Var, std::size_t);
template grad::Var record_loss(grad::Tape<double>&, LossKind, grad::Var, grad::Var, std::size_t);

}  // namespace fxprof::train
