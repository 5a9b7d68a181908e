#include "fxprof/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxprof::train {

void OneCycle::validate() const {
  if (!(lr_max > 0.0) || !std::isfinite(lr_max)) throw std::invalid_argument("lr_max must be positive");
  if (!(pct_up > 0.0 && pct_up < 1.0)) throw std::invalid_argument("pct_up must lie in (0, 1)");
  if (!(div > 0.0)) throw std::invalid_argument("div must be positive");
  if (!(final_div > 0.0)) throw std::invalid_argument("final_div must be positive");
}

double onecycle_lr(std::size_t step, std::size_t total_steps, const OneCycle& s) {
  s.validate();
  if (step > total_steps) {
    throw std::invalid_argument("step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
  }
  const double start = s.lr_max / s.div;
  const double end = start / s.final_div;
  const double peak = s.pct_up * static_cast<double>(total_steps);
  const double x = static_cast<double>(step);
  if (x <= peak) {
    if (peak == 0.0) return s.lr_max;
    return start + (s.lr_max - start) * (x / peak);
  }
  const double frac = (x - peak) / (static_cast<double>(total_steps) - peak);
  return end + (s.lr_max - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace fxprof::train
