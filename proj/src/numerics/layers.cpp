#include "v2st/numerics/layers.hpp"

#include <cmath>

namespace v2st::inline V2ST_REAL_NS::layers {

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool bias,
               double init_scale) {
  weight_ = store.add(name + ".weight", normal_tensor({in, out}, init_scale / std::sqrt(double(in)), rng));
  if (bias) bias_ = store.add(name + ".bias", Tensor::matrix(1, out));
}

Var Linear::operator()(const Var& x) const {
  Var y = ops::matmul(x, weight_);
  return bias_.defined() ? ops::add_row(y, bias_) : y;
}

RmsNorm::RmsNorm(ParamStore& store, const std::string& name, int dim) {
  gain_ = store.add(name + ".gain", Tensor::matrix(1, dim, Real{1}));
}

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, int dim, int heads, int mlp_dim,
                                   Rng& rng)
    : heads_(heads),
      norm1_(store, name + ".norm1", dim),
      norm2_(store, name + ".norm2", dim),
      q_(store, name + ".attn.q", dim, dim, rng, false),
      k_(store, name + ".attn.k", dim, dim, rng, false),
      v_(store, name + ".attn.v", dim, dim, rng, false),
      o_(store, name + ".attn.o", dim, dim, rng, true, 0.5),
      up_(store, name + ".mlp.up", dim, mlp_dim, rng),
      down_(store, name + ".mlp.down", mlp_dim, dim, rng, true, 0.5) {}

void TransformerBlock::zero_residual_outputs() {
  for (Var w : {o_.weight(), down_.weight(), o_.bias(), down_.bias()}) {
    if (w.defined()) w.mutable_value().fill(Real{0});
  }
}

Var TransformerBlock::operator()(const Var& x, const AttentionMask& mask) const {
  Var h = norm1_(x);
  Var a = masked_attention(q_(h), k_(h), v_(h), mask, heads_);
  Var x1 = ops::add(x, o_(a));
  Var m = down_(ops::gelu(up_(norm2_(x1))));
  return ops::add(x1, m);
}

Tensor sinusoidal(const std::vector<double>& positions, int dim, double max_period) {
  const int half = dim / 2;
  Tensor out = Tensor::matrix(static_cast<int>(positions.size()), dim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (int f = 0; f < half; ++f) {
      const double freq = std::exp(-std::log(max_period) * f / std::max(half, 1));
      const double a = positions[i] * freq;
      out.at(static_cast<int>(i), 2 * f) = static_cast<Real>(std::sin(a));
      out.at(static_cast<int>(i), 2 * f + 1) = static_cast<Real>(std::cos(a));
    }
  }
  return out;
}

}  // namespace v2st::inline V2ST_REAL_NS::layers
