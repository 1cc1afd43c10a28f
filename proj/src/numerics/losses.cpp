#include "v2st/numerics/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

CrossEntropy cross_entropy(const Var& logits, std::span<const int> targets, int ignore_id) {
  const int t_len = logits.rows(), vocab = logits.cols();
  if (static_cast<int>(targets.size()) != t_len) {
    throw ShapeError("cross_entropy: " + std::to_string(t_len) + " logit rows but " +
                     std::to_string(targets.size()) + " targets");
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  int count = 0;
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    if (tgt[t] == ignore_id) continue;
    if (tgt[t] < 0 || tgt[t] >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(tgt[t]) + " at position " + std::to_string(t) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    ++count;
  }
  if (count == 0) return {Var::constant(Tensor::scalar(0)), 0};

  // Softmax probabilities are kept for the backward pass.
  std::vector<Real> probs(logits.value().size());
  double total = 0;
  for (int t = 0; t < t_len; ++t) {
    const Real* row = logits.value().data() + static_cast<std::size_t>(t) * vocab;
    Real* p = probs.data() + static_cast<std::size_t>(t) * vocab;
    const Real mx = *std::max_element(row, row + vocab);
    Real z = 0;
    for (int j = 0; j < vocab; ++j) {
      p[j] = std::exp(row[j] - mx);
      z += p[j];
    }
    for (int j = 0; j < vocab; ++j) p[j] /= z;
    if (tgt[static_cast<std::size_t>(t)] != ignore_id) {
      total += static_cast<double>(mx) + std::log(static_cast<double>(z)) - row[tgt[static_cast<std::size_t>(t)]];
    }
  }
  const Real loss = static_cast<Real>(total / count);
  Var out = Var::make(Tensor::scalar(loss), {logits},
                      [probs = std::move(probs), tgt = std::move(tgt), ignore_id, vocab, count](detail::Node& self) {
                        detail::Node& pl = *self.parents[0];
                        if (!pl.requires_grad) return;
                        Real* gl = pl.value.grad().data();
                        const Real g = self.value.grad()[0] / static_cast<Real>(count);
                        for (std::size_t t = 0; t < tgt.size(); ++t) {
                          if (tgt[t] == ignore_id) continue;
                          const Real* p = probs.data() + t * static_cast<std::size_t>(vocab);
                          Real* gr = gl + t * static_cast<std::size_t>(vocab);
                          for (int j = 0; j < vocab; ++j) gr[j] += g * p[j];
                          gr[tgt[t]] -= g;
                        }
                      });
  return {out, count};
}

}  // namespace v2st::inline V2ST_REAL_NS
