#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "v2st/numerics/params.hpp"

namespace v2st::inline V2ST_REAL_NS {

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  int coords_checked = 0;
};

// Compares reverse-mode gradients with central finite differences
//   |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8)
// on at most `max_coords_per_param` randomly chosen coordinates of every
// tensor in `params`. `loss_fn` must be pure and deterministic. Existing
// gradients on `params` are cleared.
GradCheckReport grad_check(const std::function<Var()>& loss_fn, const std::vector<NamedParam>& params,
                           double eps = 1e-3, int max_coords_per_param = 64, std::uint64_t seed = 0);

}  // namespace v2st::inline V2ST_REAL_NS
