#include "grad_checks.hpp"

#include <algorithm>

#include "v2st/curriculum/curriculum.hpp"
#include "v2st/flow_decoder/flow.hpp"
#include "v2st/numerics/grad_check.hpp"

using namespace v2st;

GradCheckSummary run_grad_checks() {
  GradCheckSummary s;
  dual_lm::ModelConfig cfg;
  cfg.codec_vocab = 16;
  cfg.text_vocab = 12;
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.mlp_dim = 16;
  cfg.max_len = 16;
  cfg.video_dim = 5;
  cfg.mel_dim = 4;
  cfg.speaker_dim = 4;
  cfg.audio_eos = 12;
  cfg.speech_eos = 13;
  cfg.pad = 15;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    dual_lm::DualLm model(cfg, 900 + seed);
    Rng rng(1000 + seed);
    curriculum::MaskedModelInput in;
    const int steps = 3 + rng.index(3);
    in.video = normal_tensor({steps, 5}, 1.0, rng);
    in.text_ids = {rng.index(12), rng.index(12)};
    in.speaker_mel = normal_tensor({1, 4}, 1.0, rng);
    std::vector<int> a, sp;
    for (int t = 0; t + 1 < steps; ++t) {
      a.push_back(rng.index(12));
      sp.push_back(rng.index(12));
    }
    a.push_back(12);
    sp.push_back(13);
    in.audio_ids = a;
    in.speech_ids = sp;
    in.audio_head = in.speech_head = true;
    auto loss = [&] { return curriculum::stage_loss(model, {&in}).total; };
    const auto report = grad_check(loss, model.params().params(), 1e-4, 32, seed);
    s.lm_max_rel_error = std::max(s.lm_max_rel_error, report.max_rel_error);
    ++s.lm_instances;
  }
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    flow_decoder::VelocityField field(3, flow_decoder::VelocityConfig{8, 1, 2, 16, 8}, 1100 + seed);
    Rng rng(1200 + seed);
    std::vector<Tensor> z0, z1;
    std::vector<double> ts;
    for (int i = 0; i < 2; ++i) {
      const int frames = 2 + rng.index(4);
      z0.push_back(normal_tensor({frames, 3}, 1.0, rng));
      z1.push_back(normal_tensor({frames, 3}, 1.0, rng));
      ts.push_back(rng.uniform());
    }
    auto loss = [&] { return flow_decoder::fm_loss(field.fn(), z0, z1, ts); };
    const auto report = grad_check(loss, field.params().params(), 1e-4, 64, seed);
    s.fm_max_rel_error = std::max(s.fm_max_rel_error, report.max_rel_error);
    ++s.fm_instances;
  }
  return s;
}
