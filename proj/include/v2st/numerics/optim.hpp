#pragma once

#include <cstdint>
#include <vector>

#include "v2st/numerics/params.hpp"

namespace v2st::inline V2ST_REAL_NS {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

// First/second moment buffers per parameter plus the step counter.
class AdamState {
 public:
  explicit AdamState(const ParamStore& params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }

 private:
  friend void adam_step(ParamStore& params, AdamState& state, double lr);
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

// One bias-corrected Adam update using the gradients stored on `params`.
// Throws NumericError naming the parameter and flat index of the first
// non-finite gradient; parameters are left untouched in that case.
void adam_step(ParamStore& params, AdamState& state, double lr);

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace v2st::inline V2ST_REAL_NS
