#pragma once

#include <cstdint>
#include <vector>

#include "v2st/numerics/autograd.hpp"

namespace v2st::inline V2ST_REAL_NS {

// Which keys each query may attend to.
//   causal:     allowed(i, j) = j <= i
//   non_causal: everything allowed
//   custom:     arbitrary [T_q x T_k] boolean matrix
class AttentionMask {
 public:
  enum class Kind { causal, non_causal, custom };

  static AttentionMask causal(int query_len, int key_len);
  static AttentionMask non_causal(int query_len, int key_len);
  static AttentionMask custom(int query_len, int key_len, std::vector<std::uint8_t> allowed);
  // Custom mask that admits only the first `valid_keys` keys for every query.
  static AttentionMask key_prefix(int query_len, int key_len, int valid_keys);

  Kind kind() const { return kind_; }
  int query_len() const { return query_len_; }
  int key_len() const { return key_len_; }
  bool allowed(int i, int j) const;
  // Index of the first query row with no allowed key, or -1.
  int first_empty_row() const;

 private:
  AttentionMask(Kind kind, int tq, int tk) : kind_(kind), query_len_(tq), key_len_(tk) {}
  Kind kind_;
  int query_len_;
  int key_len_;
  std::vector<std::uint8_t> allowed_;
};

// Masked additive bias used in place of -infinity.
inline constexpr double kMaskedLogit = -1e9;

// Multi-head scaled dot-product attention. Q is [T_q, d], K and V are
// [T_k, d]; d must divide evenly into `num_heads`. Disallowed scores are
// replaced by kMaskedLogit before the row softmax, so their weights are
// exactly zero.
Var masked_attention(const Var& q, const Var& k, const Var& v, const AttentionMask& mask, int num_heads = 1);

// Row-softmax weights for a single head, exposed for invariant checks.
Tensor attention_weights(const Tensor& q, const Tensor& k, const AttentionMask& mask);

}  // namespace v2st::inline V2ST_REAL_NS
