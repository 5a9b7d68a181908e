#include "fxprof/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fxprof::train {

template <typename T>
OptimState make_optim_state(const model::ModelParams<T>& params) {
  OptimState s;
  for (const auto& p : params.tensors) {
    s.m.emplace_back(p.value.rows(), p.value.cols());
    s.v.emplace_back(p.value.rows(), p.value.cols());
  }
  return s;
}

template <typename T>
void adam_step(model::ModelParams<T>& params, const std::vector<grad::Tensor2<T>>& grads, OptimState& state,
               double lr, const AdamConfig& c) {
  const std::size_t n = params.tensors.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = params.tensors[i].value;
    const auto& m = state.m[i];
    const auto& v = state.v[i];
    if (!p.same_shape(grads[i]) || m.rows() != p.rows() || m.cols() != p.cols() || v.rows() != p.rows() ||
        v.cols() != p.cols()) {
      throw ShapeError("adam: shape mismatch on '" + params.tensors[i].name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    auto& param = params.tensors[i];
    if (param.frozen) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < param.value.size(); ++j) {
      const double g = grads[i][j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double step = lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
      param.value[j] = static_cast<T>(static_cast<double>(param.value[j]) - step);
    }
  }
}

template OptimState make_optim_state(const model::ModelParams<float>&);
template OptimState make_optim_state(const model::ModelParams<double>&);
template void adam_step(model::ModelParams<float>&, const std::vector<grad::Tensor2<float>>&, OptimState&,
                        double, const AdamConfig&);
template void adam_step(model::ModelParams<double>&, const std::vector<grad::Tensor2<double>>&, OptimState&,
                        double, const AdamConfig&);

}  // namespace fxprof::train
