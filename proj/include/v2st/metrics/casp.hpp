#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2st/numerics/layers.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

struct CaspConfig {
  int feature_dim = 18;
  int dim = 64;
  int layers = 1;
  int heads = 2;
  int pool_heads = 4;
  int mlp_dim = 128;
  int embed_dim = 64;
  int crop_frames = 100;  // 5 s at 20 Hz
  int steps = 2000;
  int batch = 32;
  double lr = 3e-3;
  std::uint64_t seed = 7;
};

// Learned-query attention pooling: one [1, dim] summary of a [L, dim] sequence.
class AttentionPool {
 public:
  AttentionPool() = default;
  AttentionPool(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng);
  Var operator()(const Var& rows) const;

 private:
  int heads_ = 1;
  Var query_;
  layers::Linear key_, value_;
};

// Feature frames -> projected, sinusoid-position-embedded, transformer-encoded,
// attention-pooled, linearly mapped and unit-normalized [1, embed_dim].
class CaspBranch {
 public:
  CaspBranch() = default;
  CaspBranch(ParamStore& store, const std::string& name, const CaspConfig& cfg, Rng& rng);

  // `features` is [F, feature_dim]. Frames past the crop are dropped; shorter
  // inputs are zero-padded to the crop when `trim_padding` is false. Padding
  // is excluded from every key set, so trimming it is exact.
  Var operator()(const Tensor& features, bool trim_padding = true) const;

  const AttentionPool& pool() const { return pool_; }

 private:
  int crop_ = 0;
  layers::Linear in_;
  Var positions_;
  std::vector<layers::TransformerBlock> blocks_;
  layers::RmsNorm norm_;
  AttentionPool pool_;
  layers::Linear out_;
};

struct CaspPair {
  Tensor audio;   // [F, feature_dim]
  Tensor speech;  // [F, feature_dim]
};

class CaspModel {
 public:
  explicit CaspModel(const CaspConfig& cfg);
  CaspModel(const CaspModel&) = delete;
  CaspModel& operator=(const CaspModel&) = delete;

  const CaspConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const CaspBranch& audio_branch() const { return audio_; }
  const CaspBranch& speech_branch() const { return speech_; }
  Var log_scale() const { return log_scale_; }

  // Symmetric in-batch contrastive loss, averaged over both directions.
  Var contrastive_loss(const std::vector<const CaspPair*>& batch) const;

 private:
  CaspConfig cfg_;
  ParamStore store_;
  CaspBranch audio_, speech_;
  Var log_scale_;
};

struct CaspTrainLog {
  std::vector<double> losses;
};

// Throws ValidationError for fewer than 2 pairs.
CaspTrainLog casp_train(CaspModel& model, const std::vector<CaspPair>& pairs);

// Pooled, unit-norm embeddings (no graph).
std::vector<double> embed_audio(const CaspModel& model, const Tensor& features);
std::vector<double> embed_speech(const CaspModel& model, const Tensor& features);

double dual_score(const CaspModel& model, const Tensor& audio_features, const Tensor& speech_features);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct RetrievalResult {
  std::vector<int> ks;
  std::vector<double> accuracy;  // per k
  double mean_matched = 0.0;     // mean diagonal score
  double mean_mismatched = 0.0;  // mean off-diagonal score
};

// For each speech item, ranks every audio item by dual_score. Ties go to the
// lower index. Throws ValidationError when N < max(ks).
RetrievalResult topk_retrieval(const CaspModel& model, const std::vector<CaspPair>& pairs,
                               const std::vector<int>& ks = {1, 3, 5});

}  // namespace v2st::inline V2ST_REAL_NS::metrics
