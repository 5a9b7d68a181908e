#pragma once

#include <cstdint>
#include <vector>

#include "fxprof/model.hpp"
#include "fxprof/tensor.hpp"

namespace fxprof::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter tensor (kept in double).
struct OptimState {
  std::vector<grad::Tensor2d> m;
  std::vector<grad::Tensor2d> v;
  std::uint64_t step = 0;
};

template <typename T>
OptimState make_optim_state(const model::ModelParams<T>& params);

/// One bias-corrected Adam update, in place. Frozen tensors are skipped
/// entirely (their moments stay zero).
template <typename T>
void adam_step(model::ModelParams<T>& params, const std::vector<grad::Tensor2<T>>& grads, OptimState& state,
               double lr, const AdamConfig& config = {});

}  // namespace fxprof::train
