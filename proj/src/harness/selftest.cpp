#include "v2st/harness/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "v2st/aligner/aligner.hpp"
#include "v2st/curriculum/curriculum.hpp"
#include "v2st/dual_lm/model.hpp"
#include "v2st/flow_decoder/flow.hpp"
#include "v2st/frontend/bpe.hpp"
#include "v2st/numerics/attention.hpp"
#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

namespace {

bool rows_equal(const Tensor& a, const Tensor& b, int rows) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < a.cols(); ++c)
      if (a.at(r, c) != b.at(r, c)) return false;
  return true;
}

bool all_equal(const Tensor& a, const Tensor& b) { return a.shape() == b.shape() && a.storage() == b.storage(); }

// Returns an empty string on success, otherwise what went wrong.
using Check = std::function<std::string()>;

std::string softmax_normalization() {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int tq = 1 + rng.index(8), tk = 1 + rng.index(8);
    const Tensor q = normal_tensor({tq, 8}, 3.0, rng), k = normal_tensor({tk, 8}, 3.0, rng);
    for (const auto& mask : {AttentionMask::non_causal(tq, tk), AttentionMask::key_prefix(tq, tk, 1 + rng.index(tk))}) {
      const Tensor w = attention_weights(q, k, mask);
      for (int i = 0; i < tq; ++i) {
        double sum = 0;
        for (int j = 0; j < tk; ++j) {
          if (w.at(i, j) < 0) return "negative attention weight";
          if (!mask.allowed(i, j) && w.at(i, j) != 0) return "masked key has non-zero weight";
          sum += w.at(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-5) return "row " + std::to_string(i) + " sums to " + std::to_string(sum);
      }
    }
  }
  return {};
}

std::string aligner_causality() {
  Rng rng(2);
  ParamStore store;
  aligner::Aligner al(store, "al", 8, 5, rng);
  const int T = 6;
  const Tensor a = normal_tensor({T, 8}, 1.0, rng), s = normal_tensor({T, 8}, 1.0, rng);
  const Var v = Var::constant(normal_tensor({T, 5}, 1.0, rng));
  NoGradGuard guard;
  const auto base = al({Var::constant(a), Var::constant(s), v});
  for (int t = 0; t + 1 < T; ++t) {
    Tensor ps = s, pa = a;
    for (int c = 0; c < 8; ++c) {
      ps.at(t + 1, c) += 2.0f;
      pa.at(t + 1, c) += 2.0f;
    }
    const auto out_s = al({Var::constant(a), Var::constant(ps), v});
    if (!rows_equal(out_s.audio.value(), base.audio.value(), t + 1)) {
      return "speech at step " + std::to_string(t + 1) + " leaked into earlier audio rows";
    }
    const auto out_a = al({Var::constant(pa), Var::constant(s), v});
    if (!rows_equal(out_a.speech.value(), base.speech.value(), t + 1)) {
      return "audio at step " + std::to_string(t + 1) + " leaked into earlier speech rows";
    }
  }
  return {};
}

dual_lm::ModelConfig tiny_lm() {
  dual_lm::ModelConfig c;
  c.codec_vocab = 32;
  c.text_vocab = 300;
  c.dim = 16;
  c.layers = 2;
  c.heads = 2;
  c.mlp_dim = 32;
  c.max_len = 64;
  c.video_dim = 6;
  c.mel_dim = 5;
  c.speaker_dim = 8;
  c.audio_eos = 29;
  c.speech_eos = 30;
  c.pad = 31;
  return c;
}

dual_lm::LmInput random_input(Rng& rng, const dual_lm::ModelConfig& c, int steps, int text_len) {
  dual_lm::LmInput in;
  in.video = normal_tensor({steps, c.video_dim}, 1.0, rng);
  for (int i = 0; i < text_len; ++i) in.text_ids.push_back(rng.index(c.text_vocab));
  in.speaker_mel = normal_tensor({1, c.mel_dim}, 1.0, rng);
  std::vector<int> a, s;
  for (int t = 0; t < steps; ++t) {
    a.push_back(rng.index(28));
    s.push_back(rng.index(28));
  }
  in.audio_ids = a;
  in.speech_ids = s;
  return in;
}

std::string lm_causality() {
  Rng rng(3);
  const auto cfg = tiny_lm();
  dual_lm::DualLm model(cfg, 4);
  NoGradGuard guard;
  // Whole-sequence causal self-attention.
  const Tensor seq = normal_tensor({9, cfg.dim}, 1.0, rng);
  const Tensor base = model.forward(Var::constant(seq)).value();
  for (int j = 1; j < 9; ++j) {
    Tensor p = seq;
    for (int c = 0; c < cfg.dim; ++c) p.at(j, c) += 1.5f;
    if (!rows_equal(model.forward(Var::constant(p)).value(), base, j)) {
      return "input row " + std::to_string(j) + " changed earlier outputs";
    }
  }
  // Logits at step t never see tokens at steps >= t of either stream.
  const auto in = random_input(rng, cfg, 6, 3);
  const auto ref = model.score(in);
  for (int t = 0; t < 6; ++t) {
    auto pert = in;
    (*pert.audio_ids)[static_cast<std::size_t>(t)] = ((*in.audio_ids)[static_cast<std::size_t>(t)] + 7) % 28;
    (*pert.speech_ids)[static_cast<std::size_t>(t)] = ((*in.speech_ids)[static_cast<std::size_t>(t)] + 5) % 28;
    const auto out = model.score(pert);
    if (!rows_equal(out.audio.value(), ref.audio.value(), t + 1) ||
        !rows_equal(out.speech.value(), ref.speech.value(), t + 1)) {
      return "tokens at step " + std::to_string(t) + " changed logits at or before that step";
    }
  }
  return {};
}

std::string zero_init_identity() {
  Rng rng(5);
  ParamStore store;
  aligner::Aligner al(store, "al", 8, 5, rng);
  al.zero_output_projections();
  layers::TransformerBlock block(store, "blk", 8, 2, 16, rng);
  block.zero_residual_outputs();
  NoGradGuard guard;
  const Tensor a = normal_tensor({5, 8}, 1.0, rng), s = normal_tensor({5, 8}, 1.0, rng);
  const auto fused = al({Var::constant(a), Var::constant(s), Var::constant(normal_tensor({5, 5}, 1.0, rng))});
  if (!all_equal(fused.audio.value(), a) || !all_equal(fused.speech.value(), s)) return "aligner is not the identity";
  const Tensor x = normal_tensor({5, 8}, 1.0, rng);
  if (!all_equal(block(Var::constant(x), AttentionMask::causal(5, 5)).value(), x)) {
    return "transformer block is not the identity";
  }
  return {};
}

std::string head_mask_gradients() {
  Rng rng(6);
  const auto cfg = tiny_lm();
  dual_lm::DualLm model(cfg, 7);
  auto masked = [&](curriculum::TaskKind task) {
    curriculum::MaskedModelInput m;
    const auto in = random_input(rng, cfg, 5, 3);
    m.task = task;
    m.id = "probe";
    m.video = in.video;
    m.text_ids = in.text_ids;
    m.speaker_mel = in.speaker_mel;
    m.audio_head = task != curriculum::TaskKind::tts;
    m.speech_head = task != curriculum::TaskKind::v2a;
    if (m.audio_head) m.audio_ids = in.audio_ids;
    if (m.speech_head) m.speech_ids = in.speech_ids;
    return m;
  };
  for (auto task : {curriculum::TaskKind::v2a, curriculum::TaskKind::tts}) {
    const auto sample = masked(task);
    model.params().zero_grad();
    curriculum::stage_loss(model, {&sample}).total.backward();
    const layers::Linear& off = task == curriculum::TaskKind::v2a ? model.speech_head() : model.audio_head();
    const layers::Linear& on = task == curriculum::TaskKind::v2a ? model.audio_head() : model.speech_head();
    for (Real g : off.weight().grad())
      if (g != 0) return std::string(curriculum::task_name(task)) + ": disabled head has a non-zero gradient";
    double live = 0;
    for (Real g : on.weight().grad()) live += std::abs(g);
    if (live == 0) return std::string(curriculum::task_name(task)) + ": enabled head has no gradient";
  }
  model.params().zero_grad();
  return {};
}

std::string bpe_round_trips() {
  const std::vector<std::string> corpus = {"the quick brown fox jumps over the lazy dog",
                                           "a quick brown dog jumps over the quick fox", "the the the dog dog"};
  const auto tok = frontend::BpeTokenizer::train(corpus, 300);
  const auto reloaded = frontend::BpeTokenizer::from_json(tok.to_json());
  for (const std::string s : {"the quick brown fox", "", "zebra QUICK 123", "caf\xc3\xa9 \xe2\x9c\x93", "dogdogdog  "}) {
    if (tok.decode(tok.encode(s)) != s) return "round trip failed for '" + s + "'";
    if (reloaded.encode(s).ids != tok.encode(s).ids) return "serialized tokenizer encodes differently";
  }
  if (tok.encode("the quick").ids.size() >= std::string("the quick").size()) return "merges never applied";
  return {};
}

std::string frozen_vae() {
  flow_decoder::VaeConfig vc;
  vc.hidden = 16;
  vc.latent = 4;
  vc.seed = 8;
  flow_decoder::ToyVae vae(vc);
  vae.freeze();
  const auto before = vae.params().snapshot();
  Rng rng(9);
  std::vector<flow_decoder::FlowItem> items;
  for (int i = 0; i < 4; ++i) {
    std::vector<float> wave(static_cast<std::size_t>(flow_decoder::kFrameSamples * 6));
    for (auto& x : wave) x = static_cast<float>(rng.normal() * 0.3);
    std::vector<int> ids;
    for (int t = 0; t < 6; ++t) ids.push_back(rng.index(16));
    items.push_back({ids, vae.encode_mean(wave).z});
  }
  const flow_decoder::TokenLatentTable table(16, vc.latent, 10);
  flow_decoder::VelocityConfig net;
  net.dim = 8;
  net.layers = 1;
  net.heads = 2;
  net.mlp_dim = 16;
  net.time_dim = 8;
  flow_decoder::VelocityField field(vc.latent, net, 11);
  flow_decoder::FlowConfig fc;
  fc.net = net;
  fc.steps = 5;
  fc.batch = 2;
  flow_decoder::flow_train(field, table, items, fc);
  const auto w1 = flow_decoder::decode_waveform(items[0].z1, vae);
  const auto w2 = flow_decoder::decode_waveform(items[0].z1, vae);
  if (!vae.params().equals(before)) return "VAE parameters changed during flow training";
  if (w1 != w2) return "frozen decode is not bitwise repeatable";
  return {};
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  const std::vector<std::pair<std::string, Check>> checks = {
      {"softmax_normalization", softmax_normalization},
      {"aligner_stream_causality", aligner_causality},
      {"lm_causality", lm_causality},
      {"zero_init_residual_identity", zero_init_identity},
      {"head_mask_zero_gradient", head_mask_gradients},
      {"bpe_round_trip", bpe_round_trips},
      {"frozen_vae_bitwise", frozen_vae},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, fn] : checks) {
    CheckResult r{name, false, {}};
    try {
      r.detail = fn();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace v2st::inline V2ST_REAL_NS::harness
