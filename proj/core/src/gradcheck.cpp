#include "fxprof/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fxprof::grad {
namespace {

double evaluate(GradCheckInstance& inst) {
  Tape<double> tape;
  std::vector<Var> vars;
  vars.reserve(inst.params.size());
  for (const auto& p : inst.params) vars.push_back(tape.parameter(p));
  const Var out = inst.build(tape, vars);
  const auto& v = tape.value(out);
  if (v.size() != 1) throw ShapeError("grad_check: builder must return a scalar");
  return v[0];
}

}  // namespace

GradCheckReport grad_check(GradCheckInstance& inst, const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-4)) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
  }
  GradCheckReport report;
  if (inst.params.empty()) return report;

  std::vector<Tensor2d> analytic;
  {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& p : inst.params) vars.push_back(tape.parameter(p));
    const Var out = inst.build(tape, vars);
    tape.backward(out);
    for (const Var v : vars) analytic.push_back(tape.grad(v));
  }

  for (std::size_t p = 0; p < inst.params.size(); ++p) {
    Tensor2d& param = inst.params[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + options.eps;
      const double up = evaluate(inst);
      param[i] = saved - options.eps;
      const double down = evaluate(inst);
      param[i] = saved;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[p][i] * options.analytic_scale;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace fxprof::grad
