#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "v2st/curriculum/curriculum.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/optim.hpp"

using namespace v2st;
using namespace v2st::curriculum;

namespace {

struct Fixture {
  std::vector<synthdata::MultimodalSample> samples;
  frontend::BpeTokenizer tokenizer;
  dual_lm::ModelConfig config;

  Fixture() {
    const auto split = synthdata::gen_split(6, 2, 31);
    for (const auto& s : split.train) samples.push_back(synthdata::gen_scene(s));
    for (const auto& s : split.eval) samples.push_back(synthdata::gen_scene(s));
    tokenizer = train_tokenizer(samples, 290);
    config = desk_model_config(tokenizer.vocab_size());
    config.dim = 32;
    config.layers = 2;
    config.heads = 2;
    config.mlp_dim = 64;
    config.speaker_dim = 16;
  }

  TaskData data(TaskKind task, int begin, int end) const {
    TaskData d;
    for (int i = begin; i < end; ++i) d[task].push_back(mask_for_task(samples[static_cast<std::size_t>(i)], task, tokenizer));
    return d;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void zero(const layers::Linear& l) {
  for (Var v : {l.weight(), l.bias()}) v.mutable_value().fill(0);
}

}  // namespace

TEST(Curriculum, AllowedTasksPerStage) {
  EXPECT_EQ(allowed_tasks(1), std::vector<TaskKind>{TaskKind::v2a});
  EXPECT_EQ(allowed_tasks(2), (std::vector<TaskKind>{TaskKind::v2a, TaskKind::tts}));
  EXPECT_EQ(allowed_tasks(3).size(), 3u);
  EXPECT_THROW(allowed_tasks(4), ValidationError);
  EXPECT_EQ(parse_task("V2ST"), TaskKind::v2st);
  EXPECT_THROW(parse_task("asr"), ValidationError);
}

TEST(Curriculum, StageDefaultsScaleFullScaleRanges) {
  const auto s1 = StageConfig::defaults(1, 10.0);
  EXPECT_DOUBLE_EQ(s1.lr_min, 2e-5);
  EXPECT_DOUBLE_EQ(s1.lr_max, 2e-3);
  const auto s3 = StageConfig::defaults(3, 1.0);
  EXPECT_DOUBLE_EQ(s3.lr_min, 2e-7);
  EXPECT_DOUBLE_EQ(s3.lr_max, 2e-5);
  EXPECT_DOUBLE_EQ(s3.mixing.at(TaskKind::v2st), 0.5);
  for (int s = 1; s <= 3; ++s) EXPECT_NO_THROW(StageConfig::defaults(s, 1.0).validate());
}

TEST(Curriculum, StageConfigRejectsBadMixing) {
  auto cfg = StageConfig::defaults(1, 1.0);
  cfg.mixing[TaskKind::tts] = 0.5;
  cfg.mixing[TaskKind::v2a] = 0.5;
  EXPECT_THROW(cfg.validate(), ValidationError);  // TTS not allowed in stage 1
  auto cfg2 = StageConfig::defaults(2, 1.0);
  cfg2.mixing[TaskKind::tts] = 0.7;
  EXPECT_THROW(cfg2.validate(), ValidationError);  // sums to 1.2
}

TEST(MaskForTask, VideoToAudioUsesPromptAndZeroSpeaker) {
  const auto& f = fixture();
  const auto in = mask_for_task(f.samples[0], TaskKind::v2a, f.tokenizer);
  for (Real x : in.speaker_mel.values()) EXPECT_EQ(x, 0);
  EXPECT_EQ(in.text_ids, f.tokenizer.encode(frontend::kVideoToAudioPrompt).ids);
  EXPECT_TRUE(in.audio_head);
  EXPECT_FALSE(in.speech_head);
  EXPECT_TRUE(in.audio_ids.has_value());
  EXPECT_FALSE(in.speech_ids.has_value());
  EXPECT_EQ(in.steps(), f.samples[0].steps());
}

TEST(MaskForTask, TextToSpeechZeroesEveryVideoRow) {
  const auto& f = fixture();
  const auto in = mask_for_task(f.samples[1], TaskKind::tts, f.tokenizer);
  EXPECT_EQ(in.video.rows(), f.samples[1].steps());
  for (Real x : in.video.values()) EXPECT_EQ(x, 0);
  EXPECT_EQ(in.text_ids, f.tokenizer.encode(f.samples[1].text).ids);
  EXPECT_FALSE(in.audio_head);
  EXPECT_TRUE(in.speech_head);
  EXPECT_FALSE(in.audio_ids.has_value());
  double norm = 0;
  for (Real x : in.speaker_mel.values()) norm += x * x;
  EXPECT_GT(norm, 0);
}

TEST(MaskForTask, JointTaskKeepsEverything) {
  const auto& f = fixture();
  const auto& s = f.samples[2];
  const auto in = mask_for_task(s, TaskKind::v2st, f.tokenizer);
  EXPECT_TRUE(in.audio_head && in.speech_head);
  EXPECT_EQ(*in.audio_ids, s.tokens.audio_ids);
  EXPECT_EQ(*in.speech_ids, s.tokens.speech_ids);
  EXPECT_EQ(in.text_ids, f.tokenizer.encode(s.text).ids);
  EXPECT_TRUE(same_values(in.video, frontend::resample_video(frontend::subsample_frames(s.video, 3), s.steps())));
  // Same speaker pooling as TTS.
  EXPECT_TRUE(same_values(in.speaker_mel, mask_for_task(s, TaskKind::tts, f.tokenizer).speaker_mel));
}

TEST(MaskForTask, MissingFieldNamesFieldAndTask) {
  const auto& f = fixture();
  auto s = f.samples[0];
  s.text.clear();
  try {
    mask_for_task(s, TaskKind::tts, f.tokenizer);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("transcript"), std::string::npos);
    EXPECT_NE(msg.find("tts"), std::string::npos);
  }
  EXPECT_NO_THROW(mask_for_task(s, TaskKind::v2a, f.tokenizer));
}

TEST(StageLoss, DisabledHeadGetsExactlyZeroGradient) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 1);
  const auto data = f.data(TaskKind::v2a, 0, 2);
  std::vector<const MaskedModelInput*> batch{&data.at(TaskKind::v2a)[0], &data.at(TaskKind::v2a)[1]};
  model.params().zero_grad();
  const auto loss = stage_loss(model, batch);
  loss.total.backward();
  EXPECT_EQ(loss.heads_on, 1);
  EXPECT_EQ(loss.speech_ce, 0.0);
  for (const Var& v : {model.speech_head().weight(), model.speech_head().bias()})
    for (Real g : v.grad()) EXPECT_EQ(g, 0);
  double audio_grad = 0;
  for (Real g : model.audio_head().weight().grad()) audio_grad += std::abs(g);
  EXPECT_GT(audio_grad, 0);
}

TEST(StageLoss, UniformHeadsGiveTwiceLogVocab) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 2);
  zero(model.audio_head());
  zero(model.speech_head());
  const auto data = f.data(TaskKind::v2st, 0, 3);
  std::vector<const MaskedModelInput*> batch;
  for (const auto& in : data.at(TaskKind::v2st)) batch.push_back(&in);
  const auto loss = stage_loss(model, batch);
  EXPECT_NEAR(loss.total.item(), 2 * std::log(256.0), 1e-4);
  EXPECT_EQ(loss.audio_positions, loss.speech_positions);
}

TEST(StageLoss, RejectsEmptyAndMixedBatches) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 3);
  EXPECT_THROW(stage_loss(model, {}), ValidationError);
  const auto a = mask_for_task(f.samples[0], TaskKind::v2a, f.tokenizer);
  const auto t = mask_for_task(f.samples[0], TaskKind::tts, f.tokenizer);
  EXPECT_THROW(stage_loss(model, {&a, &t}), ValidationError);
}

TEST(StageLoss, SingleSampleOverfitsBelowMilliNat) {
  const auto& f = fixture();
  auto cfg = f.config;
  cfg.layers = 1;
  dual_lm::DualLm model(cfg, 4);
  const auto in = mask_for_task(f.samples[0], TaskKind::v2st, f.tokenizer);
  AdamState opt(model.params());
  double last = 0;
  for (int step = 0; step < 400 && (step == 0 || last >= 1e-3); ++step) {
    model.params().zero_grad();
    const auto loss = stage_loss(model, {&in});
    last = loss.total.item();
    loss.total.backward();
    adam_step(model.params(), opt, 1e-2);
  }
  EXPECT_LT(last, 1e-3);
}

TEST(TaskSampler, EqualWeightsAreBalanced) {
  TaskSampler sampler({{TaskKind::v2a, 0.5}, {TaskKind::tts, 0.5}}, 17);
  int v2a = 0;
  for (int i = 0; i < 1000; ++i) v2a += sampler.next() == TaskKind::v2a;
  EXPECT_NEAR(v2a, 500, 25);
}

TEST(RunStage, LaterStageNeedsPriorCheckpoint) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 5);
  auto cfg = StageConfig::defaults(2, 10.0);
  cfg.steps = 2;
  auto data = f.data(TaskKind::v2a, 0, 2);
  data.merge(f.data(TaskKind::tts, 0, 2));
  try {
    run_stage(cfg, model, data, std::nullopt);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("missing prior checkpoint"), std::string::npos);
  }
  auto wrong = snapshot(model, 2, 0, 0);
  EXPECT_THROW(run_stage(cfg, model, data, wrong), ValidationError);
  EXPECT_NO_THROW(run_stage(cfg, model, data, snapshot(model, 1, 0, 0)));
}

TEST(RunStage, SameSeedGivesIdenticalLogs) {
  const auto& f = fixture();
  auto cfg = StageConfig::defaults(2, 10.0);
  cfg.steps = 6;
  cfg.batch_size = 2;
  cfg.seed = 99;
  auto data = f.data(TaskKind::v2a, 0, 4);
  data.merge(f.data(TaskKind::tts, 0, 4));
  std::vector<std::vector<StepRecord>> logs;
  for (int run = 0; run < 2; ++run) {
    dual_lm::DualLm model(f.config, 6);
    logs.push_back(run_stage(cfg, model, data, snapshot(model, 1, 0, 0)).log);
  }
  ASSERT_EQ(logs[0].size(), logs[1].size());
  for (std::size_t i = 0; i < logs[0].size(); ++i) {
    EXPECT_EQ(logs[0][i].task, logs[1][i].task);
    EXPECT_EQ(logs[0][i].loss, logs[1][i].loss);
  }
}

TEST(RunStage, LossFallsOnItsOwnData) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 7);
  auto cfg = StageConfig::defaults(1, 20.0);
  cfg.steps = 30;
  cfg.warmup_steps = 3;
  cfg.batch_size = 2;
  const auto result = run_stage(cfg, model, f.data(TaskKind::v2a, 0, 4), std::nullopt);
  EXPECT_FALSE(result.aborted);
  const auto curve = result.curve(TaskKind::v2a);
  EXPECT_LT(curve.back(), curve.front());
  EXPECT_EQ(result.checkpoint.stage, 1);
  EXPECT_EQ(result.checkpoint.step, 30);
}

TEST(RunStage, NonFiniteLossRestoresLastGoodState) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 8);
  const auto before = model.params().snapshot();
  auto data = f.data(TaskKind::v2a, 0, 1);
  data.at(TaskKind::v2a)[0].video.storage()[0] = std::numeric_limits<Real>::quiet_NaN();
  auto cfg = StageConfig::defaults(1, 10.0);
  cfg.steps = 5;
  cfg.batch_size = 1;
  const auto result = run_stage(cfg, model, data, std::nullopt);
  EXPECT_TRUE(result.aborted);
  EXPECT_NE(result.abort_reason.find("non-finite"), std::string::npos);
  EXPECT_TRUE(model.params().equals(before));
  EXPECT_EQ(result.checkpoint.step, 0);
}

TEST(ForgettingProbe, UntrainedModelIsNearUniform) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 9);
  TaskData held = f.data(TaskKind::v2a, 6, 8);
  held.merge(f.data(TaskKind::tts, 6, 8));
  held.merge(f.data(TaskKind::v2st, 6, 8));
  const auto ce = forgetting_probe(model, held);
  ASSERT_EQ(ce.size(), 3u);
  for (const auto& [task, value] : ce) EXPECT_NEAR(value, std::log(256.0), 0.02 * std::log(256.0)) << task_name(task);
}

TEST(ForgettingProbe, LeavesParametersAndGradientsUntouched) {
  const auto& f = fixture();
  dual_lm::DualLm model(f.config, 10);
  model.params().zero_grad();
  const auto before = model.params().snapshot();
  forgetting_probe(model, f.data(TaskKind::v2st, 0, 2));
  EXPECT_TRUE(model.params().equals(before));
  for (const auto& p : model.params().params())
    for (Real g : p.var.grad()) ASSERT_EQ(g, 0) << p.name;
}

TEST(Snapshot, RestoreRejectsMismatchedModels) {
  const auto& f = fixture();
  dual_lm::DualLm a(f.config, 11);
  auto cfg = f.config;
  cfg.dim = 16;
  dual_lm::DualLm b(cfg, 11);
  EXPECT_THROW(restore(b, snapshot(a, 1, 0, 0)), ValidationError);
  dual_lm::DualLm c(f.config, 12);
  restore(c, snapshot(a, 1, 0, 0));
  EXPECT_TRUE(c.params().equals(a.params().snapshot()));
}
