#include "v2st/metrics/casp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/losses.hpp"
#include "v2st/numerics/optim.hpp"
#include "v2st/numerics/schedule.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

namespace {

// Fixed sinusoidal codes with periods spanning the crop, shared by both
// branches so event timing is expressed in one coordinate system.
Tensor frame_positions(int frames, int dim) {
  std::vector<double> pos(static_cast<std::size_t>(frames));
  std::iota(pos.begin(), pos.end(), 0.0);
  return layers::sinusoidal(pos, dim, 2.0 * frames);
}

}  // namespace

AttentionPool::AttentionPool(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng)
    : heads_(heads),
      query_(store.add(name + ".query", normal_tensor({1, dim}, 1.0, rng))),
      key_(store, name + ".key", dim, dim, rng, false),
      value_(store, name + ".value", dim, dim, rng, false) {}

Var AttentionPool::operator()(const Var& rows) const {
  return masked_attention(query_, key_(rows), value_(rows), AttentionMask::non_causal(1, rows.rows()), heads_);
}

CaspBranch::CaspBranch(ParamStore& store, const std::string& name, const CaspConfig& cfg, Rng& rng)
    : crop_(cfg.crop_frames),
      in_(store, name + ".in", cfg.feature_dim, cfg.dim, rng),
      positions_(Var::constant(frame_positions(cfg.crop_frames, cfg.dim))),
      norm_(store, name + ".norm", cfg.dim),
      pool_(store, name + ".pool", cfg.dim, cfg.pool_heads, rng),
      out_(store, name + ".out", cfg.dim, cfg.embed_dim, rng) {
  for (int l = 0; l < cfg.layers; ++l) {
    blocks_.emplace_back(store, name + ".block" + std::to_string(l), cfg.dim, cfg.heads, cfg.mlp_dim, rng);
    blocks_.back().zero_residual_outputs();
  }
}

Var CaspBranch::operator()(const Tensor& features, bool trim_padding) const {
  const int frames = features.empty() ? 0 : features.rows();
  if (frames < 1) throw ValidationError("casp: item has no feature frames");
  const int valid = std::min(frames, crop_);
  const int rows = trim_padding ? valid : crop_;
  Tensor x = Tensor::matrix(rows, features.cols());
  std::copy(features.storage().begin(), features.storage().begin() + static_cast<std::ptrdiff_t>(valid) * features.cols(),
            x.storage().begin());

  Var h = ops::add(in_(Var::constant(x)), ops::slice_rows(positions_, 0, rows));
  const auto mask = AttentionMask::key_prefix(rows, rows, valid);
  for (const auto& block : blocks_) h = block(h, mask);
  h = ops::slice_rows(norm_(h), 0, valid);
  return ops::l2_normalize_rows(out_(pool_(h)));
}

CaspModel::CaspModel(const CaspConfig& cfg) : cfg_(cfg) {
  Rng rng(cfg.seed);
  audio_ = CaspBranch(store_, "casp.audio", cfg, rng);
  speech_ = CaspBranch(store_, "casp.speech", cfg, rng);
  // CLIP initialisation: temperature 0.07.
  log_scale_ = store_.add("casp.log_scale", Tensor::scalar(static_cast<Real>(std::log(1.0 / 0.07))));
}

Var CaspModel::contrastive_loss(const std::vector<const CaspPair*>& batch) const {
  const int b = static_cast<int>(batch.size());
  if (b < 2) throw ValidationError("casp: batch needs at least 2 pairs for negatives");
  std::vector<Var> a_rows, s_rows;
  for (const auto* p : batch) {
    a_rows.push_back(audio_(p->audio));
    s_rows.push_back(speech_(p->speech));
  }
  const Var a = ops::concat_rows(a_rows), s = ops::concat_rows(s_rows);
  const Var logits = ops::mul_scalar(ops::matmul_nt(a, s), ops::exp(log_scale_));
  std::vector<int> targets(static_cast<std::size_t>(b));
  std::iota(targets.begin(), targets.end(), 0);
  const Var a2s = cross_entropy(logits, targets, -1).loss;
  const Var s2a = cross_entropy(ops::transpose(logits), targets, -1).loss;
  return ops::scale(ops::add(a2s, s2a), Real(0.5));
}

CaspTrainLog casp_train(CaspModel& model, const std::vector<CaspPair>& pairs) {
  const auto& cfg = model.config();
  if (pairs.size() < 2) throw ValidationError("casp_train: need at least 2 pairs");
  Rng rng(derive_seed(cfg.seed, 0xCA5F));
  AdamState opt(model.params());
  const int batch = std::min<int>(cfg.batch, static_cast<int>(pairs.size()));
  const int warmup = std::max(1, cfg.steps / 20);
  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  CaspTrainLog log;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const CaspPair*> items;
    while (static_cast<int>(items.size()) < batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      items.push_back(&pairs[static_cast<std::size_t>(order[cursor++])]);
    }
    model.params().zero_grad();
    const Var loss = model.contrastive_loss(items);
    if (!std::isfinite(loss.item())) throw NumericError("casp_train: non-finite loss at step " + std::to_string(step));
    loss.backward();
    const double lr = cosine_lr(step + 1, warmup, cfg.lr * 0.05, cfg.lr, cfg.steps);
    adam_step(model.params(), opt, lr);
    // Keep the logit scale within CLIP's customary bound of 100.
    Var ls = model.log_scale();
    ls.mutable_value()[0] = std::min(ls.value()[0], static_cast<Real>(std::log(100.0)));
    log.losses.push_back(loss.item());
    if ((step + 1) % 100 == 0) spdlog::debug("casp step {} loss {:.4f}", step + 1, loss.item());
  }
  return log;
}

namespace {

std::vector<double> to_vector(const Var& v) {
  return std::vector<double>(v.value().values().begin(), v.value().values().end());
}

}  // namespace

std::vector<double> embed_audio(const CaspModel& model, const Tensor& features) {
  NoGradGuard guard;
  return to_vector(model.audio_branch()(features));
}

std::vector<double> embed_speech(const CaspModel& model, const Tensor& features) {
  NoGradGuard guard;
  return to_vector(model.speech_branch()(features));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double dual_score(const CaspModel& model, const Tensor& audio_features, const Tensor& speech_features) {
  return cosine(embed_audio(model, audio_features), embed_speech(model, speech_features));
}

RetrievalResult topk_retrieval(const CaspModel& model, const std::vector<CaspPair>& pairs, const std::vector<int>& ks) {
  const int n = static_cast<int>(pairs.size());
  const int max_k = ks.empty() ? 1 : *std::max_element(ks.begin(), ks.end());
  if (n < 1 || n < max_k) throw ValidationError("topk_retrieval: need at least max(ks) pairs");
  std::vector<std::vector<double>> audio, speech;
  for (const auto& p : pairs) {
    audio.push_back(embed_audio(model, p.audio));
    speech.push_back(embed_speech(model, p.speech));
  }
  RetrievalResult r;
  r.ks = ks;
  r.accuracy.assign(ks.size(), 0.0);
  double diag = 0, off = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) scores[static_cast<std::size_t>(j)] = cosine(audio[static_cast<std::size_t>(j)], speech[static_cast<std::size_t>(i)]);
    const double mate = scores[static_cast<std::size_t>(i)];
    int rank = 0;
    for (int j = 0; j < n; ++j) {
      const double s = scores[static_cast<std::size_t>(j)];
      if (s > mate || (s == mate && j < i)) ++rank;
      if (j == i) {
        diag += s;
      } else {
        off += s;
      }
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (rank < ks[k]) r.accuracy[k] += 1.0;
    }
  }
  for (auto& a : r.accuracy) a /= n;
  r.mean_matched = diag / n;
  r.mean_mismatched = n > 1 ? off / (static_cast<double>(n) * (n - 1)) : 0.0;
  return r;
}

}  // namespace v2st::inline V2ST_REAL_NS::metrics
