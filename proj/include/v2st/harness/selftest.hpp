#pragma once

#include <string>
#include <vector>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Structural invariants on freshly initialized components: attention
// normalization, stream and sequence causality, residual identity at zero
// init, head masking, BPE round trips and VAE freezing.
std::vector<CheckResult> run_selftest();

}  // namespace v2st::inline V2ST_REAL_NS::harness
