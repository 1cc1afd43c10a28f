#include <gtest/gtest.h>

#include <cmath>

#include "v2st/dual_lm/generate.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/losses.hpp"
#include "v2st/numerics/optim.hpp"

using namespace v2st;
using namespace v2st::dual_lm;

namespace {

ModelConfig small_config() {
  ModelConfig c;
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

LmInput random_input(Rng& rng, const ModelConfig& c, int steps, int text_len) {
  LmInput in;
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

void zero(const layers::Linear& lin) {
  Var w = lin.weight(), b = lin.bias();
  w.mutable_value().fill(0);
  if (b.defined()) b.mutable_value().fill(0);
}

int argmax(std::span<const Real> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

TEST(SequenceLayout, SpanArithmetic) {
  const SequenceLayout empty_text{0, 7};
  EXPECT_EQ(empty_text.spk_end(), 1);
  EXPECT_EQ(empty_text.text_begin(), 1);
  EXPECT_EQ(empty_text.text_end(), 1);
  EXPECT_EQ(empty_text.mm_begin(), 1);
  EXPECT_EQ(empty_text.mm_end(), 1 + 7 + 1);
  const SequenceLayout with_text{5, 7};
  EXPECT_EQ(with_text.total(), 1 + 5 + 1 + 7);
}

TEST(BuildSequence, ZeroSpeakerEmptyTextAndStreamSwap) {
  const auto cfg = small_config();
  DualLm model(cfg, 1);
  Rng rng(2);
  const Var h_a = Var::constant(normal_tensor({4, cfg.dim}, 1.0, rng));
  const Var h_s = Var::constant(normal_tensor({4, cfg.dim}, 1.0, rng));
  const Var spk = model.speaker_embedding(Tensor::matrix(1, cfg.mel_dim));
  for (Real v : spk.value().values()) EXPECT_EQ(v, 0);
  const auto built = model.build_sequence(spk, {}, {h_a, h_s});
  EXPECT_EQ(built.rows.rows(), 1 + 0 + 1 + 4);
  EXPECT_EQ(built.layout.mm_begin(), 1);
  const auto swapped = model.build_sequence(spk, {}, {h_s, h_a});
  EXPECT_TRUE(same_values(built.rows.value(), swapped.rows.value()));
}

TEST(Forward, SingleRowAndCausality) {
  const auto cfg = small_config();
  DualLm model(cfg, 3);
  Rng rng(4);
  const Tensor one = model.forward(Var::constant(normal_tensor({1, cfg.dim}, 1.0, rng))).value();
  EXPECT_TRUE(one.all_finite());
  const Tensor x = normal_tensor({8, cfg.dim}, 1.0, rng);
  const Tensor base = model.forward(Var::constant(x)).value();
  for (int j = 1; j < 8; ++j) {
    Tensor p = x;
    for (int c = 0; c < cfg.dim; ++c) p.at(j, c) += 1.5f;
    const Tensor out = model.forward(Var::constant(p)).value();
    for (int r = 0; r < j; ++r)
      for (int c = 0; c < cfg.dim; ++c) ASSERT_EQ(out.at(r, c), base.at(r, c));
  }
}

TEST(DualHeads, ShapesAndDisjointParameters) {
  const auto cfg = small_config();
  DualLm model(cfg, 5);
  Rng rng(6);
  const auto in = random_input(rng, cfg, 6, 3);
  const auto before = model.score(in);
  EXPECT_EQ(before.audio.shape(), (Shape{6, cfg.codec_vocab}));
  EXPECT_EQ(before.speech.shape(), (Shape{6, cfg.codec_vocab}));
  zero(model.speech_head());
  const auto after = model.score(in);
  EXPECT_TRUE(same_values(before.audio.value(), after.audio.value()));
  EXPECT_FALSE(same_values(before.speech.value(), after.speech.value()));
}

TEST(DualHeads, ZeroHeadsGiveUniformCrossEntropy) {
  const auto cfg = small_config();
  DualLm model(cfg, 7);
  zero(model.audio_head());
  zero(model.speech_head());
  Rng rng(8);
  const auto in = random_input(rng, cfg, 5, 2);
  const auto logits = model.score(in);
  const double expected = std::log(static_cast<double>(cfg.codec_vocab));
  EXPECT_NEAR(cross_entropy(logits.audio, *in.audio_ids, -1).loss.item(), expected, 1e-5);
  EXPECT_NEAR(cross_entropy(logits.speech, *in.speech_ids, -1).loss.item(), expected, 1e-5);
}

TEST(Scoring, TokensAtOrAfterStepDoNotAffectStep) {
  const auto cfg = small_config();
  DualLm model(cfg, 9);
  Rng rng(10);
  const auto in = random_input(rng, cfg, 7, 3);
  const auto base = model.score(in);
  for (int t = 0; t < 7; ++t) {
    auto p = in;
    for (int u = t; u < 7; ++u) {
      (*p.audio_ids)[static_cast<std::size_t>(u)] = ((*p.audio_ids)[static_cast<std::size_t>(u)] + 5) % 28;
      (*p.speech_ids)[static_cast<std::size_t>(u)] = ((*p.speech_ids)[static_cast<std::size_t>(u)] + 3) % 28;
    }
    const auto out = model.score(p);
    for (int r = 0; r <= t; ++r) {
      for (int c = 0; c < cfg.codec_vocab; ++c) {
        ASSERT_EQ(out.audio.value().at(r, c), base.audio.value().at(r, c));
        ASSERT_EQ(out.speech.value().at(r, c), base.speech.value().at(r, c));
      }
    }
  }
}

namespace {

GenerateRequest request_for(const LmInput& in, int steps) {
  GenerateRequest req;
  req.video = {in.video, 40.0};
  req.text_ids = in.text_ids;
  req.speaker_mel = in.speaker_mel;
  req.max_steps = steps;
  return req;
}

}  // namespace

TEST(Generate, GreedyIsDeterministicAndMatchesTopOne) {
  const auto cfg = small_config();
  DualLm model(cfg, 11);
  Rng rng(12);
  const auto in = random_input(rng, cfg, 6, 3);
  auto req = request_for(in, 6);
  const auto a = generate(model, req);
  const auto b = generate(model, req);
  EXPECT_EQ(a.streams.audio_ids, b.streams.audio_ids);
  EXPECT_EQ(a.streams.speech_ids, b.streams.speech_ids);
  req.sampling = Sampling::top_k(1, 1e-6);
  req.seed = 99;
  const auto c = generate(model, req);
  EXPECT_EQ(a.streams.audio_ids, c.streams.audio_ids);
  EXPECT_EQ(a.streams.speech_ids, c.streams.speech_ids);
}

TEST(Generate, PrefixConsistencyWithTeacherForcing) {
  const auto cfg = small_config();
  DualLm model(cfg, 13);
  Rng rng(14);
  const auto in = random_input(rng, cfg, 9, 4);
  const auto gen = generate(model, request_for(in, 9));
  auto forced = in;
  forced.audio_ids = gen.streams.audio_ids;
  forced.speech_ids = gen.streams.speech_ids;
  const auto logits = model.score(forced);
  const int audio_end = gen.audio_eos_step < 0 ? 9 : gen.audio_eos_step + 1;
  const int speech_end = gen.speech_eos_step < 0 ? 9 : gen.speech_eos_step + 1;
  for (int t = 0; t < audio_end; ++t) {
    EXPECT_EQ(argmax(logits.audio.value().row_span(t)), gen.streams.audio_ids[static_cast<std::size_t>(t)]);
  }
  for (int t = 0; t < speech_end; ++t) {
    EXPECT_EQ(argmax(logits.speech.value().row_span(t)), gen.streams.speech_ids[static_cast<std::size_t>(t)]);
  }
}

TEST(Generate, DisabledStreamEmitsPadAndBadLengthThrows) {
  const auto cfg = small_config();
  DualLm model(cfg, 15);
  Rng rng(16);
  const auto in = random_input(rng, cfg, 5, 2);
  auto req = request_for(in, 5);
  req.speech_on = false;
  const auto gen = generate(model, req);
  for (int id : gen.streams.speech_ids) EXPECT_EQ(id, cfg.pad);
  req.max_steps = 0;
  EXPECT_THROW(generate(model, req), ValidationError);
}

TEST(Training, AdamHalvesCrossEntropyOnFixedBatch) {
  const auto cfg = small_config();
  DualLm model(cfg, 17);
  Rng rng(18);
  std::vector<LmInput> batch;
  for (int i = 0; i < 8; ++i) {
    auto in = random_input(rng, cfg, 8, 3);
    const int start = rng.index(16);
    for (int t = 0; t < 8; ++t) {
      (*in.audio_ids)[static_cast<std::size_t>(t)] = (start + t) % 16;
      (*in.speech_ids)[static_cast<std::size_t>(t)] = 16 + (start + 2 * t) % 12;
    }
    batch.push_back(in);
  }
  AdamState opt(model.params());
  auto total_loss = [&] {
    Var total = Var::constant(Tensor::scalar(0));
    for (const auto& in : batch) {
      const auto logits = model.score(in);
      total = ops::add(total, cross_entropy(logits.audio, *in.audio_ids, -1).loss);
      total = ops::add(total, cross_entropy(logits.speech, *in.speech_ids, -1).loss);
    }
    return ops::scale(total, Real(1.0 / (2 * batch.size())));
  };
  for (int step = 0; step < 200; ++step) {
    model.params().zero_grad();
    total_loss().backward();
    adam_step(model.params(), opt, 3e-3);
  }
  NoGradGuard guard;
  EXPECT_LT(total_loss().item(), 0.5 * std::log(static_cast<double>(cfg.codec_vocab)));
}
