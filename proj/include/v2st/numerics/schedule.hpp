#pragma once

#include <cstdint>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS {

// Linear warm-up from 0 to lr_max over `warmup_steps`, then cosine decay to
// lr_min at `total_steps`. Steps past the end clamp to lr_min (logged once
// per process).
double cosine_lr(std::int64_t step, std::int64_t warmup_steps, double lr_min, double lr_max, std::int64_t total_steps);

}  // namespace v2st::inline V2ST_REAL_NS
