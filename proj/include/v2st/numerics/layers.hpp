#pragma once

#include <string>
#include <vector>

#include "v2st/numerics/attention.hpp"
#include "v2st/numerics/ops.hpp"
#include "v2st/numerics/params.hpp"

// Small building blocks shared by the aligner, language model, flow network,
// VAE and contrastive encoders.
namespace v2st::inline V2ST_REAL_NS::layers {

class Linear {
 public:
  Linear() = default;
  // Weight ~ N(0, init_scale / sqrt(in)); bias zero.
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool bias = true,
         double init_scale = 1.0);

  Var operator()(const Var& x) const;
  Var weight() const { return weight_; }
  Var bias() const { return bias_; }
  int in_features() const { return weight_.rows(); }
  int out_features() const { return weight_.cols(); }

 private:
  Var weight_;  // [in, out]
  Var bias_;    // [1, out] or undefined
};

class RmsNorm {
 public:
  RmsNorm() = default;
  RmsNorm(ParamStore& store, const std::string& name, int dim);
  Var operator()(const Var& x) const { return ops::rms_norm(x, gain_); }

 private:
  Var gain_;
};

// Pre-norm transformer block: x + attn(norm(x)); x + mlp(norm(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamStore& store, const std::string& name, int dim, int heads, int mlp_dim, Rng& rng);

  Var operator()(const Var& x, const AttentionMask& mask) const;
  // Zeroes the attention and MLP output projections so the block starts as
  // the identity map.
  void zero_residual_outputs();

 private:
  int heads_ = 1;
  RmsNorm norm1_, norm2_;
  Linear q_, k_, v_, o_;
  Linear up_, down_;
};

// Fixed sinusoidal embedding of positions or continuous times: row i holds
// [sin(p_i w_0), cos(p_i w_0), sin(p_i w_1), ...] with geometric frequencies.
Tensor sinusoidal(const std::vector<double>& positions, int dim, double max_period = 10000.0);

}  // namespace v2st::inline V2ST_REAL_NS::layers
