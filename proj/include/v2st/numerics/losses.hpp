#pragma once

#include <span>

#include "v2st/numerics/autograd.hpp"

namespace v2st::inline V2ST_REAL_NS {

struct CrossEntropy {
  Var loss;       // [1,1] mean over contributing positions (0 when none)
  int count = 0;  // positions whose target != ignore_id
};

// Mean token cross-entropy of `logits` [T, V] against `targets` [T].
// Positions whose target equals `ignore_id` are skipped. Throws IndexError for
// any other target outside [0, V).
CrossEntropy cross_entropy(const Var& logits, std::span<const int> targets, int ignore_id);

}  // namespace v2st::inline V2ST_REAL_NS
