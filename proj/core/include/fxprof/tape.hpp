#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "fxprof/tensor.hpp"

namespace fxprof::grad {

enum class OpKind {
  Dense,
  LeakyRelu,
  ConcatRows,
  Add,
  Scale,
  Sum,
  FramedTransform,
  OverlapAdd,
  Magnitude,
  LogCoshMean,
  LogSnr,
};

std::string_view op_name(OpKind kind);

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class LeafKind {
  Constant,         // never receives a gradient
  Parameter,        // trainable
  FrozenParameter,  // trainable tensor excluded from updates: gradient is exactly zero
};

/// Define-by-run recording of a forward pass. Leaves either own their value
/// or borrow it from the caller (parameters), in which case the borrowed
/// tensor must outlive the tape. Records capture the tape itself, so a tape
/// is neither copyable nor movable. Backward walks records in reverse order and
/// accumulates gradients additively.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2<T> value);
  Var parameter(const Tensor2<T>& value, bool frozen = false);

  Var dense(Var x, Var W, Var b);
  Var leaky_relu(Var x, T slope);
  Var concat_rows(Var top, Var bottom);
  Var add(Var a, Var b);
  Var scale(Var x, T factor);
  Var sum(Var x);
  Var framed_transform(Var signal, Var W, std::size_t hop);
  Var overlap_add(Var frames, Var W, std::size_t hop, std::size_t batch);
  /// sqrt(re^2 + im^2 + eps), elementwise.
  Var magnitude(Var re, Var im, T eps);
  /// Scalar: mean over all elements of log(cosh(pred - target)).
  Var logcosh_mean(Var pred, Var target);
  /// Scalar: mean over rows of -10 log10((sum target^2 + eps) / (sum err^2 + eps)).
  Var logsnr(Var pred, Var target, T eps);

  const Tensor2<T>& value(Var v) const;
  /// Gradient after backward(); zero-filled for constants and frozen parameters.
  const Tensor2<T>& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Replays the tape in reverse from a 1x1 result.
  void backward(Var loss, T seed = T{1});

  std::size_t num_records() const noexcept { return records_.size(); }
  OpKind record_kind(std::size_t i) const { return records_.at(i).kind; }
  /// Inputs of every leaky_relu record, in execution order. Gradient checks
  /// use these to keep finite differences away from the kink.
  std::vector<Var> leaky_relu_inputs() const;

 private:
  struct Node {
    Tensor2<T> owned;
    const Tensor2<T>* borrowed = nullptr;
    Tensor2<T> grad;
    LeafKind leaf = LeafKind::Constant;
    bool requires_grad = false;
    const Tensor2<T>& val() const { return borrowed ? *borrowed : owned; }
  };
  struct Record {
    OpKind kind;
    std::function<void()> backward;
    Var input{};  // set for leaky_relu only
  };

  Var push(Tensor2<T> value, bool requires_grad);
  Node& node(Var v) { return nodes_.at(v.id); }
  const Node& node(Var v) const { return nodes_.at(v.id); }
  // Returns the gradient buffer of v, allocating zeros on first use, or
  // nullptr when v does not require a gradient.
  Tensor2<T>* grad_buffer(Var v);

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  bool backward_done_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace fxprof::grad
