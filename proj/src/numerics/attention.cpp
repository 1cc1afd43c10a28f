#include "v2st/numerics/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

AttentionMask AttentionMask::causal(int query_len, int key_len) { return {Kind::causal, query_len, key_len}; }

AttentionMask AttentionMask::non_causal(int query_len, int key_len) {
  return {Kind::non_causal, query_len, key_len};
}

AttentionMask AttentionMask::custom(int query_len, int key_len, std::vector<std::uint8_t> allowed) {
  if (allowed.size() != static_cast<std::size_t>(query_len) * static_cast<std::size_t>(key_len)) {
    throw ShapeError("custom mask needs " + std::to_string(query_len) + "x" + std::to_string(key_len) +
                     " entries, got " + std::to_string(allowed.size()));
  }
  AttentionMask m(Kind::custom, query_len, key_len);
  m.allowed_ = std::move(allowed);
  return m;
}

AttentionMask AttentionMask::key_prefix(int query_len, int key_len, int valid_keys) {
  std::vector<std::uint8_t> allowed(static_cast<std::size_t>(query_len) * static_cast<std::size_t>(key_len), 0);
  for (int i = 0; i < query_len; ++i)
    for (int j = 0; j < std::min(valid_keys, key_len); ++j) allowed[static_cast<std::size_t>(i) * key_len + j] = 1;
  return custom(query_len, key_len, std::move(allowed));
}

bool AttentionMask::allowed(int i, int j) const {
  switch (kind_) {
    case Kind::causal:
      return j <= i;
    case Kind::non_causal:
      return true;
    case Kind::custom:
      return allowed_[static_cast<std::size_t>(i) * key_len_ + j] != 0;
  }
  return false;
}

int AttentionMask::first_empty_row() const {
  if (key_len_ == 0) return query_len_ > 0 ? 0 : -1;
  if (kind_ != Kind::custom) return -1;
  for (int i = 0; i < query_len_; ++i) {
    bool any = false;
    for (int j = 0; j < key_len_ && !any; ++j) any = allowed(i, j);
    if (!any) return i;
  }
  return -1;
}

namespace {

void check_inputs(const Var& q, const Var& k, const Var& v, const AttentionMask& mask, int num_heads) {
  const int d = q.cols();
  if (k.cols() != d || v.cols() != d) {
    throw ShapeError("masked_attention: feature sizes differ: Q " + shape_str(q.shape()) + ", K " +
                     shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("masked_attention: K has " + std::to_string(k.rows()) + " rows but V has " +
                     std::to_string(v.rows()));
  }
  if (mask.query_len() != q.rows() || mask.key_len() != k.rows()) {
    throw ShapeError("masked_attention: mask is " + std::to_string(mask.query_len()) + "x" +
                     std::to_string(mask.key_len()) + " but inputs are " + std::to_string(q.rows()) + "x" +
                     std::to_string(k.rows()));
  }
  if (num_heads < 1 || d % num_heads != 0) {
    throw ShapeError("masked_attention: " + std::to_string(d) + " features do not split into " +
                     std::to_string(num_heads) + " heads");
  }
  if (const int row = mask.first_empty_row(); row >= 0) {
    throw DegenerateMaskError("masked_attention: query row " + std::to_string(row) + " has no allowed key");
  }
}

// Softmax of one score row in place; disallowed entries already hold
// kMaskedLogit.
void softmax_row(Real* s, int n) {
  Real mx = s[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, s[j]);
  Real z = 0;
  for (int j = 0; j < n; ++j) {
    s[j] = std::exp(s[j] - mx);
    z += s[j];
  }
  const Real inv = Real{1} / z;
  for (int j = 0; j < n; ++j) s[j] *= inv;
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, const AttentionMask& mask) {
  const int tq = q.rows(), tk = k.rows(), d = q.cols();
  const Real scale = Real{1} / std::sqrt(static_cast<Real>(d));
  Tensor p = Tensor::matrix(tq, tk);
  for (int i = 0; i < tq; ++i) {
    Real* s = p.data() + static_cast<std::size_t>(i) * tk;
    for (int j = 0; j < tk; ++j) {
      if (!mask.allowed(i, j)) {
        s[j] = static_cast<Real>(kMaskedLogit);
        continue;
      }
      Real dot = 0;
      for (int c = 0; c < d; ++c) dot += q.at(i, c) * k.at(j, c);
      s[j] = dot * scale;
    }
    softmax_row(s, tk);
  }
  return p;
}

Var masked_attention(const Var& q, const Var& k, const Var& v, const AttentionMask& mask, int num_heads) {
  check_inputs(q, k, v, mask, num_heads);
  const int tq = q.rows(), tk = k.rows(), d = q.cols();
  const int dh = d / num_heads;
  const Real scale = Real{1} / std::sqrt(static_cast<Real>(dh));

  // probs[h][i][j]
  std::vector<Real> probs(static_cast<std::size_t>(num_heads) * tq * tk);
  Tensor out = Tensor::matrix(tq, d);
  const Real* qd = q.value().data();
  const Real* kd = k.value().data();
  const Real* vd = v.value().data();
  for (int h = 0; h < num_heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < tq; ++i) {
      Real* s = probs.data() + (static_cast<std::size_t>(h) * tq + i) * tk;
      const Real* qi = qd + static_cast<std::size_t>(i) * d + off;
      for (int j = 0; j < tk; ++j) {
        if (!mask.allowed(i, j)) {
          s[j] = static_cast<Real>(kMaskedLogit);
          continue;
        }
        const Real* kj = kd + static_cast<std::size_t>(j) * d + off;
        Real dot = 0;
        for (int c = 0; c < dh; ++c) dot += qi[c] * kj[c];
        s[j] = dot * scale;
      }
      softmax_row(s, tk);
      Real* oi = out.data() + static_cast<std::size_t>(i) * d + off;
      for (int j = 0; j < tk; ++j) {
        const Real w = s[j];
        if (w == Real{0}) continue;
        const Real* vj = vd + static_cast<std::size_t>(j) * d + off;
        for (int c = 0; c < dh; ++c) oi[c] += w * vj[c];
      }
    }
  }

  return Var::make(std::move(out), {q, k, v},
                   [probs = std::move(probs), tq, tk, d, dh, num_heads, scale](detail::Node& self) {
                     detail::Node& pq = *self.parents[0];
                     detail::Node& pk = *self.parents[1];
                     detail::Node& pv = *self.parents[2];
                     Real* gq = pq.requires_grad ? pq.value.grad().data() : nullptr;
                     Real* gk = pk.requires_grad ? pk.value.grad().data() : nullptr;
                     Real* gv = pv.requires_grad ? pv.value.grad().data() : nullptr;
                     const Real* g = self.value.grad().data();
                     const Real* qd = pq.value.data();
                     const Real* kd = pk.value.data();
                     const Real* vd = pv.value.data();
                     std::vector<Real> dp(static_cast<std::size_t>(tk));
                     for (int h = 0; h < num_heads; ++h) {
                       const int off = h * dh;
                       for (int i = 0; i < tq; ++i) {
                         const Real* p = probs.data() + (static_cast<std::size_t>(h) * tq + i) * tk;
                         const Real* gi = g + static_cast<std::size_t>(i) * d + off;
                         // dV_j += p_ij * dO_i ; dP_ij = dO_i . V_j
                         Real rowdot = 0;
                         for (int j = 0; j < tk; ++j) {
                           if (p[j] == Real{0}) {
                             dp[static_cast<std::size_t>(j)] = 0;
                             continue;
                           }
                           const Real* vj = vd + static_cast<std::size_t>(j) * d + off;
                           Real acc = 0;
                           for (int c = 0; c < dh; ++c) acc += gi[c] * vj[c];
                           dp[static_cast<std::size_t>(j)] = acc;
                           rowdot += acc * p[j];
                           if (gv) {
                             Real* gvj = gv + static_cast<std::size_t>(j) * d + off;
                             for (int c = 0; c < dh; ++c) gvj[c] += p[j] * gi[c];
                           }
                         }
                         // dS_ij = p_ij (dP_ij - sum_l p_il dP_il)
                         const Real* qi = qd + static_cast<std::size_t>(i) * d + off;
                         for (int j = 0; j < tk; ++j) {
                           if (p[j] == Real{0}) continue;
                           const Real ds = p[j] * (dp[static_cast<std::size_t>(j)] - rowdot) * scale;
                           const Real* kj = kd + static_cast<std::size_t>(j) * d + off;
                           if (gq) {
                             Real* gqi = gq + static_cast<std::size_t>(i) * d + off;
                             for (int c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
                           }
                           if (gk) {
                             Real* gkj = gk + static_cast<std::size_t>(j) * d + off;
                             for (int c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
                           }
                         }
                       }
                     }
                   });
}

}  // namespace v2st::inline V2ST_REAL_NS
