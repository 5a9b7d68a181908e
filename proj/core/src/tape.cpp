#include "fxprof/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "fxprof/ops.hpp"

namespace fxprof::grad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Dense: return "dense";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::Add: return "add";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::FramedTransform: return "framed_transform";
    case OpKind::OverlapAdd: return "overlap_add";
    case OpKind::Magnitude: return "magnitude";
    case OpKind::LogCoshMean: return "logcosh_mean";
    case OpKind::LogSnr: return "logsnr";
  }
  return "unknown";
}

template <typename T>
Var Tape<T>::push(Tensor2<T> value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::constant(Tensor2<T> value) {
  return push(std::move(value), false);
}

template <typename T>
Var Tape<T>::parameter(const Tensor2<T>& value, bool frozen) {
  Node n;
  n.borrowed = &value;
  n.leaf = frozen ? LeafKind::FrozenParameter : LeafKind::Parameter;
  n.requires_grad = !frozen;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor2<T>& Tape<T>::value(Var v) const {
  return node(v).val();
}

template <typename T>
const Tensor2<T>& Tape<T>::grad(Var v) const {
  if (!backward_done_) throw std::logic_error("Tape::grad called before backward");
  return node(v).grad;
}

template <typename T>
Tensor2<T>* Tape<T>::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.val().size() || !n.grad.same_shape(n.val())) {
    n.grad = Tensor2<T>(n.val().rows(), n.val().cols());
  }
  return &n.grad;
}

template <typename T>
Var Tape<T>::dense(Var x, Var W, Var b) {
  Tensor2<T> y = dense_forward(value(x), value(W), value(b));
  const bool rg = requires_grad(x) || requires_grad(W) || requires_grad(b);
  const Var out = push(std::move(y), rg);
  if (rg) {
    records_.push_back({OpKind::Dense, [this, x, W, b, out] {
                          const Tensor2<T>& dy = node(out).grad;
                          dense_backward(dy, value(x), value(W), grad_buffer(x), grad_buffer(W),
                                         grad_buffer(b));
                        }});
  } else {
    records_.push_back({OpKind::Dense, nullptr});
  }
  return out;
}

template <typename T>
Var Tape<T>::leaky_relu(Var x, T slope) {
  if (!(slope >= T{0} && slope < T{1})) throw std::invalid_argument("leaky slope must be in [0,1)");
  const Var out = push(grad::leaky_relu(value(x), slope), requires_grad(x));
  records_.push_back({OpKind::LeakyRelu, requires_grad(x) ? std::function<void()>([this, x, out, slope] {
                                            leaky_relu_backward(node(out).grad, value(x), slope,
                                                                *grad_buffer(x));
                                          })
                                                          : nullptr,
                      x});
  return out;
}

template <typename T>
std::vector<Var> Tape<T>::leaky_relu_inputs() const {
  std::vector<Var> out;
  for (const auto& r : records_) {
    if (r.kind == OpKind::LeakyRelu) out.push_back(r.input);
  }
  return out;
}

template <typename T>
Var Tape<T>::concat_rows(Var top, Var bottom) {
  const Tensor2<T>& a = value(top);
  const Tensor2<T>& c = value(bottom);
  if (a.cols() != c.cols()) {
    throw ShapeError("concat_rows: " + shape_str(a) + " vs " + shape_str(c));
  }
  Tensor2<T> y(a.rows() + c.rows(), a.cols());
  std::copy(a.values().begin(), a.values().end(), y.values().begin());
  std::copy(c.values().begin(), c.values().end(), y.values().begin() + a.size());
  const bool rg = requires_grad(top) || requires_grad(bottom);
  const Var out = push(std::move(y), rg);
  records_.push_back({OpKind::ConcatRows,
                      rg ? std::function<void()>([this, top, bottom, out] {
                        const Tensor2<T>& dy = node(out).grad;
                        const std::size_t split = value(top).size();
                        if (auto* g = grad_buffer(top)) {
                          for (std::size_t i = 0; i < split; ++i) (*g)[i] += dy[i];
                        }
                        if (auto* g = grad_buffer(bottom)) {
                          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += dy[split + i];
                        }
                      })
                         : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  if (!value(a).same_shape(value(b))) {
    throw ShapeError("add: " + shape_str(value(a)) + " vs " + shape_str(value(b)));
  }
  Tensor2<T> y = value(a);
  y.matrix() += value(b).matrix();
  const bool rg = requires_grad(a) || requires_grad(b);
  const Var out = push(std::move(y), rg);
  records_.push_back({OpKind::Add, rg ? std::function<void()>([this, a, b, out] {
                                     const Tensor2<T>& dy = node(out).grad;
                                     if (auto* g = grad_buffer(a)) g->matrix() += dy.matrix();
                                     if (auto* g = grad_buffer(b)) g->matrix() += dy.matrix();
                                   })
                                      : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::scale(Var x, T factor) {
  Tensor2<T> y = value(x);
  y.matrix() *= factor;
  const Var out = push(std::move(y), requires_grad(x));
  records_.push_back({OpKind::Scale, requires_grad(x) ? std::function<void()>([this, x, out, factor] {
                                        grad_buffer(x)->matrix() += factor * node(out).grad.matrix();
                                      })
                                                      : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::sum(Var x) {
  const T s = value(x).matrix().sum();
  const Var out = push(Tensor2<T>(1, 1, s), requires_grad(x));
  records_.push_back({OpKind::Sum, requires_grad(x) ? std::function<void()>([this, x, out] {
                                      grad_buffer(x)->matrix().array() += node(out).grad[0];
                                    })
                                                    : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::framed_transform(Var signal, Var W, std::size_t hop) {
  const Tensor2<T>& w = value(W);
  Tensor2<T> cols = gather_frames(value(signal), w.cols(), hop);
  Tensor2<T> y(w.rows(), cols.cols());
  y.matrix().noalias() = w.matrix() * cols.matrix();
  const bool rg = requires_grad(signal) || requires_grad(W);
  const Var out = push(std::move(y), rg);
  if (!rg) {
    records_.push_back({OpKind::FramedTransform, nullptr});
    return out;
  }
  // The gathered frames are only needed for dW.
  const Var cols_var = push(std::move(cols), false);
  records_.push_back({OpKind::FramedTransform, [this, signal, W, out, cols_var, hop] {
                        const Tensor2<T>& dy = node(out).grad;
                        if (auto* gW = grad_buffer(W)) {
                          gW->matrix().noalias() += dy.matrix() * value(cols_var).matrix().transpose();
                        }
                        if (auto* gs = grad_buffer(signal)) {
                          Tensor2<T> dcols(value(W).cols(), dy.cols());
                          dcols.matrix().noalias() = value(W).matrix().transpose() * dy.matrix();
                          scatter_frames_add(dcols, hop, *gs);
                        }
                      }});
  return out;
}

template <typename T>
Var Tape<T>::overlap_add(Var frames, Var W, std::size_t hop, std::size_t batch) {
  Tensor2<T> y = overlap_add_synthesis(value(frames), value(W), hop, batch);
  const bool rg = requires_grad(frames) || requires_grad(W);
  const Var out = push(std::move(y), rg);
  records_.push_back(
      {OpKind::OverlapAdd,
       rg ? std::function<void()>([this, frames, W, out, hop, batch] {
         const Tensor2<T>& dy = node(out).grad;
         const Tensor2<T>& w = value(W);
         const std::size_t frame = w.rows();
         const std::size_t n_frames = value(frames).cols() / batch;
         const auto counts = overlap_counts(n_frames, frame, hop);
         Tensor2<T> dsegs(frame, value(frames).cols());
         for (std::size_t b = 0; b < batch; ++b) {
           const auto row = dy.row_span(b);
           for (std::size_t t = 0; t < n_frames; ++t) {
             const std::size_t c = b * n_frames + t;
             for (std::size_t n = 0; n < frame; ++n) {
               dsegs(n, c) = static_cast<T>(row[t * hop + n] / counts[t * hop + n]);
             }
           }
         }
         if (auto* gW = grad_buffer(W)) {
           gW->matrix().noalias() += dsegs.matrix() * value(frames).matrix().transpose();
         }
         if (auto* gf = grad_buffer(frames)) {
           gf->matrix().noalias() += w.matrix().transpose() * dsegs.matrix();
         }
       })
          : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::magnitude(Var re, Var im, T eps) {
  const Tensor2<T>& a = value(re);
  const Tensor2<T>& c = value(im);
  if (!a.same_shape(c)) throw ShapeError("magnitude: " + shape_str(a) + " vs " + shape_str(c));
  Tensor2<T> y(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = std::sqrt(a[i] * a[i] + c[i] * c[i] + eps);
  const bool rg = requires_grad(re) || requires_grad(im);
  const Var out = push(std::move(y), rg);
  records_.push_back({OpKind::Magnitude, rg ? std::function<void()>([this, re, im, out] {
                                           const Tensor2<T>& dy = node(out).grad;
                                           const Tensor2<T>& m = value(out);
                                           if (auto* g = grad_buffer(re)) {
                                             const Tensor2<T>& a2 = value(re);
                                             for (std::size_t i = 0; i < m.size(); ++i) (*g)[i] += dy[i] * a2[i] / m[i];
                                           }
                                           if (auto* g = grad_buffer(im)) {
                                             const Tensor2<T>& c2 = value(im);
                                             for (std::size_t i = 0; i < m.size(); ++i) (*g)[i] += dy[i] * c2[i] / m[i];
                                           }
                                         })
                                            : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::logcosh_mean(Var pred, Var target) {
  const Tensor2<T>& p = value(pred);
  const Tensor2<T>& t = value(target);
  if (!p.same_shape(t)) throw ShapeError("logcosh: " + shape_str(p) + " vs " + shape_str(t));
  if (p.empty()) throw ShapeError("logcosh: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += log_cosh(static_cast<double>(p[i]) - static_cast<double>(t[i]));
  const T loss = static_cast<T>(acc / static_cast<double>(p.size()));
  const bool rg = requires_grad(pred) || requires_grad(target);
  const Var out = push(Tensor2<T>(1, 1, loss), rg);
  records_.push_back({OpKind::LogCoshMean, rg ? std::function<void()>([this, pred, target, out] {
                                             const T seed = node(out).grad[0];
                                             const Tensor2<T>& p2 = value(pred);
                                             const Tensor2<T>& t2 = value(target);
                                             const T inv_n = T{1} / static_cast<T>(p2.size());
                                             auto* gp = grad_buffer(pred);
                                             auto* gt = grad_buffer(target);
                                             for (std::size_t i = 0; i < p2.size(); ++i) {
                                               const T g = seed * inv_n * std::tanh(p2[i] - t2[i]);
                                               if (gp) (*gp)[i] += g;
                                               if (gt) (*gt)[i] -= g;
                                             }
                                           })
                                              : nullptr});
  return out;
}

template <typename T>
Var Tape<T>::logsnr(Var pred, Var target, T eps) {
  const Tensor2<T>& p = value(pred);
  const Tensor2<T>& t = value(target);
  if (!p.same_shape(t)) throw ShapeError("logsnr: " + shape_str(p) + " vs " + shape_str(t));
  if (p.empty()) throw ShapeError("logsnr: empty input");
  const std::size_t rows = p.rows();
  std::vector<double> err_power(rows, 0.0);
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double sig = 0.0, err = 0.0;
    const auto pr = p.row_span(r);
    const auto tr = t.row_span(r);
    for (std::size_t i = 0; i < pr.size(); ++i) {
      const double e = static_cast<double>(pr[i]) - static_cast<double>(tr[i]);
      sig += static_cast<double>(tr[i]) * static_cast<double>(tr[i]);
      err += e * e;
    }
    err_power[r] = err;
    acc += -10.0 * std::log10((sig + static_cast<double>(eps)) / (err + static_cast<double>(eps)));
  }
  const Var out = push(Tensor2<T>(1, 1, static_cast<T>(acc / static_cast<double>(rows))),
                       requires_grad(pred) || requires_grad(target));
  if (!(requires_grad(pred) || requires_grad(target))) {
    records_.push_back({OpKind::LogSnr, nullptr});
    return out;
  }
  records_.push_back({OpKind::LogSnr, [this, pred, target, out, eps, err_power] {
                        const double seed = static_cast<double>(node(out).grad[0]);
                        const Tensor2<T>& p2 = value(pred);
                        const Tensor2<T>& t2 = value(target);
                        auto* gp = grad_buffer(pred);
                        auto* gt = grad_buffer(target);
                        const double rows_d = static_cast<double>(p2.rows());
                        constexpr double k = 10.0 / 2.30258509299404568402;
                        for (std::size_t r = 0; r < p2.rows(); ++r) {
                          const auto pr = p2.row_span(r);
                          const auto tr = t2.row_span(r);
                          double sig = 0.0;
                          for (std::size_t i = 0; i < tr.size(); ++i) {
                            sig += static_cast<double>(tr[i]) * static_cast<double>(tr[i]);
                          }
                          const double e_den = err_power[r] + static_cast<double>(eps);
                          const double s_den = sig + static_cast<double>(eps);
                          for (std::size_t i = 0; i < pr.size(); ++i) {
                            const double e = static_cast<double>(pr[i]) - static_cast<double>(tr[i]);
                            const double ge = seed / rows_d * k * 2.0 * e / e_den;
                            const std::size_t idx = r * pr.size() + i;
                            if (gp) (*gp)[idx] += static_cast<T>(ge);
                            if (gt) {
                              const double gs = -seed / rows_d * k * 2.0 * static_cast<double>(tr[i]) / s_den;
                              (*gt)[idx] += static_cast<T>(gs - ge);
                            }
                          }
                        }
                      }});
  return out;
}

template <typename T>
void Tape<T>::backward(Var loss, T seed) {
  const Tensor2<T>& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: tape result is " + shape_str(lv) + ", expected a scalar");
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor2<T>(n.val().rows(), n.val().cols());
  }
  if (node(loss).requires_grad) {
    node(loss).grad[0] = seed;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->backward) it->backward();
    }
  }
  for (Node& n : nodes_) {
    if (!n.requires_grad) n.grad = Tensor2<T>(n.val().rows(), n.val().cols());
  }
  backward_done_ = true;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace fxprof::grad
