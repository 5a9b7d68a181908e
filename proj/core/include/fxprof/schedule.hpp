#pragma once

#include <cstddef>

namespace fxprof::train {

struct OneCycle {
  double lr_max = 1e-3;
  double pct_up = 0.3;
  double div = 25.0;
  double final_div = 1e4;

  /// Throws std::invalid_argument unless lr_max > 0, 0 < pct_up < 1, div > 0, final_div > 0.
  void validate() const;
};

/// Linear ramp lr_max/div -> lr_max over the first pct_up * total_steps, then
/// cosine anneal down to lr_max / (div * final_div) at step total_steps.
double onecycle_lr(std::size_t step, std::size_t total_steps, const OneCycle& schedule);

inline double onecycle_lr(std::size_t step, std::size_t total_steps, double lr_max,
                          double pct_up = 0.3, double div = 25.0, double final_div = 1e4) {
  return onecycle_lr(step, total_steps, OneCycle{lr_max, pct_up, div, final_div});
}

}  // namespace fxprof::train
