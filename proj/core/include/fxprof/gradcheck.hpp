#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fxprof/tape.hpp"

namespace fxprof::grad {

/// A differentiable computation under test: parameter tensors plus a builder
/// that records the computation on a tape and returns a scalar result.
struct GradCheckInstance {
  std::string name;
  std::vector<Tensor2d> params;
  std::function<Var(Tape<double>&, std::span<const Var>)> build;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Multiplies the analytic gradient before comparison; only used to
  // exercise the checker itself.
  double analytic_scale = 1.0;
};

/// Compares backward() against central differences for every parameter
/// element: max |a - n| / max(|a|, |n|, 1e-12). An instance with no
/// parameters reports 0.
GradCheckReport grad_check(GradCheckInstance& instance, const GradCheckOptions& options = {});

inline double grad_check(GradCheckInstance& instance, double eps) {
  return grad_check(instance, GradCheckOptions{eps, 1.0}).max_rel_error;
}

}  // namespace fxprof::grad
