#include "v2st/numerics/schedule.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

double cosine_lr(std::int64_t step, std::int64_t warmup_steps, double lr_min, double lr_max, std::int64_t total_steps) {
  if (lr_min > lr_max) {
    throw ValidationError("cosine_lr: lr_min " + std::to_string(lr_min) + " exceeds lr_max " + std::to_string(lr_max));
  }
  if (step < 0 || warmup_steps < 0 || total_steps < 1) {
    throw ValidationError("cosine_lr: invalid step/warmup/total");
  }
  if (step > total_steps) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      spdlog::warn("cosine_lr: step {} past schedule end {}; clamping to lr_min", step, total_steps);
    }
    return lr_min;
  }
  if (step < warmup_steps) return lr_max * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return lr_max;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return lr_min + (lr_max - lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace v2st::inline V2ST_REAL_NS
