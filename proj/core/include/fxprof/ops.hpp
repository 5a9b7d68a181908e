#pragma once

// Forward/backward kernels for the fixed set of differentiable operations.
// All signals are batched: a Tensor2 with one row per example. Framed
// features are laid out as (features x batch*frames), column b*T + t.

#include <cmath>
#include <cstddef>

#include "fxprof/tensor.hpp"

namespace fxprof::grad {

inline constexpr double kDefaultLeakySlope = 0.1;

/// Number of frames of size `frame` at stride `hop` that fit in `length` samples.
inline std::size_t frame_count(std::size_t length, std::size_t frame, std::size_t hop) {
  if (hop == 0) throw ShapeError("hop must be >= 1");
  if (frame == 0 || length < frame) {
    throw ShapeError("signal of length " + std::to_string(length) +
                     " is shorter than one frame of " + std::to_string(frame));
  }
  return (length - frame) / hop + 1;
}

/// y = W x + b, with b broadcast across the columns of x.
template <typename T>
Tensor2<T> dense_forward(const Tensor2<T>& x, const Tensor2<T>& W, const Tensor2<T>& b) {
  if (x.rows() != W.cols()) {
    throw ShapeError("dense: input rows " + std::to_string(x.rows()) + " != weight cols " +
                     std::to_string(W.cols()));
  }
  if (b.rows() != W.rows() || b.cols() != 1) {
    throw ShapeError("dense: bias " + shape_str(b) + " does not match weight " + shape_str(W));
  }
  Tensor2<T> y(W.rows(), x.cols());
  y.matrix().noalias() = W.matrix() * x.matrix();
  y.matrix().colwise() += b.matrix().col(0);
  return y;
}

/// Accumulates dx, dW, db for y = W x + b. Null outputs are skipped.
template <typename T>
void dense_backward(const Tensor2<T>& dy, const Tensor2<T>& x, const Tensor2<T>& W,
                    Tensor2<T>* dx, Tensor2<T>* dW, Tensor2<T>* db) {
  if (dx) dx->matrix().noalias() += W.matrix().transpose() * dy.matrix();
  if (dW) dW->matrix().noalias() += dy.matrix() * x.matrix().transpose();
  if (db) db->matrix().col(0) += dy.matrix().rowwise().sum();
}

template <typename T>
Tensor2<T> leaky_relu(const Tensor2<T>& x, T slope) {
  Tensor2<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T{0} ? x[i] : slope * x[i];
  return y;
}

template <typename T>
void leaky_relu_backward(const Tensor2<T>& dy, const Tensor2<T>& x, T slope, Tensor2<T>& dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] += x[i] >= T{0} ? dy[i] : slope * dy[i];
}

/// Gathers hopped frames of every row of `signal` into columns (frame x batch*T).
template <typename T>
Tensor2<T> gather_frames(const Tensor2<T>& signal, std::size_t frame, std::size_t hop) {
  const std::size_t n_frames = frame_count(signal.cols(), frame, hop);
  const std::size_t batch = signal.rows();
  Tensor2<T> cols(frame, batch * n_frames);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = signal.row_span(b);
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t c = b * n_frames + t;
      for (std::size_t n = 0; n < frame; ++n) cols(n, c) = row[t * hop + n];
    }
  }
  return cols;
}

/// Adjoint of gather_frames: scatters frame columns back into a batch x length signal.
template <typename T>
void scatter_frames_add(const Tensor2<T>& cols, std::size_t hop, Tensor2<T>& signal) {
  const std::size_t frame = cols.rows();
  const std::size_t n_frames = frame_count(signal.cols(), frame, hop);
  for (std::size_t b = 0; b < signal.rows(); ++b) {
    auto row = signal.row_span(b);
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t c = b * n_frames + t;
      for (std::size_t n = 0; n < frame; ++n) row[t * hop + n] += cols(n, c);
    }
  }
}

/// Strided 1-D convolution: column t of each example is W * signal[t*hop : t*hop + N].
template <typename T>
Tensor2<T> framed_transform_forward(const Tensor2<T>& signal, const Tensor2<T>& W,
                                    std::size_t hop) {
  const Tensor2<T> cols = gather_frames(signal, W.cols(), hop);
  Tensor2<T> out(W.rows(), cols.cols());
  out.matrix().noalias() = W.matrix() * cols.matrix();
  return out;
}

/// Per-sample count of frames covering each output position.
inline std::vector<double> overlap_counts(std::size_t n_frames, std::size_t frame,
                                          std::size_t hop) {
  std::vector<double> counts((n_frames - 1) * hop + frame, 0.0);
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t n = 0; n < frame; ++n) counts[t * hop + n] += 1.0;
  }
  return counts;
}

/// Maps each frame column through W (N x C) and overlap-adds the segments at
/// stride `hop`, dividing every output sample by its overlap count.
template <typename T>
Tensor2<T> overlap_add_synthesis(const Tensor2<T>& frames, const Tensor2<T>& W, std::size_t hop,
                                 std::size_t batch = 1) {
  if (W.cols() != frames.rows()) {
    throw ShapeError("overlap_add: weight " + shape_str(W) + " incompatible with frames " +
                     shape_str(frames));
  }
  if (hop == 0) throw ShapeError("hop must be >= 1");
  if (hop > W.rows()) throw ShapeError("overlap_add: hop larger than frame leaves gaps");
  if (batch == 0 || frames.cols() % batch != 0 || frames.cols() == 0) {
    throw ShapeError("overlap_add: " + std::to_string(frames.cols()) +
                     " frame columns do not split into batch " + std::to_string(batch));
  }
  const std::size_t frame = W.rows();
  const std::size_t n_frames = frames.cols() / batch;
  const auto counts = overlap_counts(n_frames, frame, hop);
  Tensor2<T> segs(frame, frames.cols());
  segs.matrix().noalias() = W.matrix() * frames.matrix();
  Tensor2<T> out(batch, counts.size());
  for (std::size_t b = 0; b < batch; ++b) {
    auto row = out.row_span(b);
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t c = b * n_frames + t;
      for (std::size_t n = 0; n < frame; ++n) row[t * hop + n] += segs(n, c);
    }
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<T>(row[i] / counts[i]);
  }
  return out;
}

/// log(cosh(d)). Small |d| goes through log1p(2 sinh^2(d/2)), which keeps full
/// relative precision near zero; large |d| uses |d| + log1p(exp(-2|d|)) - ln 2,
/// which never overflows. Evaluated in double.
inline double log_cosh(double d) {
  const double a = std::abs(d);
  if (a < 1.0) {
    const double s = std::sinh(0.5 * a);
    return std::log1p(2.0 * s * s);
  }
  return a + std::log1p(std::exp(-2.0 * a)) - 0.69314718055994530942;
}

}  // namespace fxprof::grad
