#include "v2st/curriculum/curriculum.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "v2st/frontend/speaker.hpp"
#include "v2st/frontend/video.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/losses.hpp"
#include "v2st/numerics/optim.hpp"
#include "v2st/numerics/schedule.hpp"

namespace v2st::inline V2ST_REAL_NS::curriculum {

std::string_view task_name(TaskKind task) {
  switch (task) {
    case TaskKind::v2a: return "v2a";
    case TaskKind::tts: return "tts";
    case TaskKind::v2st: return "v2st";
  }
  return "?";
}

TaskKind parse_task(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "v2a") return TaskKind::v2a;
  if (lower == "tts") return TaskKind::tts;
  if (lower == "v2st") return TaskKind::v2st;
  throw ValidationError("unknown task '" + std::string(name) + "'");
}

std::vector<TaskKind> allowed_tasks(int stage) {
  switch (stage) {
    case 1: return {TaskKind::v2a};
    case 2: return {TaskKind::v2a, TaskKind::tts};
    case 3: return {TaskKind::v2a, TaskKind::tts, TaskKind::v2st};
    default: throw ValidationError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
}

LrRange paper_lr_range(int stage) {
  switch (stage) {
    case 1: return {2e-6, 2e-4};
    case 2: return {2e-7, 2e-4};
    case 3: return {2e-7, 2e-5};
    default: throw ValidationError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
}

StageConfig StageConfig::defaults(int stage, double desk_factor) {
  const auto range = paper_lr_range(stage);
  StageConfig cfg;
  cfg.stage = stage;
  cfg.lr_min = range.min * desk_factor;
  cfg.lr_max = range.max * desk_factor;
  if (stage == 1) cfg.mixing = {{TaskKind::v2a, 1.0}};
  if (stage == 2) cfg.mixing = {{TaskKind::v2a, 0.5}, {TaskKind::tts, 0.5}};
  if (stage == 3) cfg.mixing = {{TaskKind::v2a, 0.25}, {TaskKind::tts, 0.25}, {TaskKind::v2st, 0.5}};
  return cfg;
}

void StageConfig::validate() const {
  const auto allowed = allowed_tasks(stage);
  if (steps < 1 || batch_size < 1 || warmup_steps < 0) {
    throw ValidationError("stage " + std::to_string(stage) + ": steps and batch_size must be positive");
  }
  if (!(lr_max > 0) || lr_min < 0 || lr_min > lr_max) {
    throw ValidationError("stage " + std::to_string(stage) + ": need 0 <= lr_min <= lr_max and lr_max > 0");
  }
  if (mixing.empty()) throw ValidationError("stage " + std::to_string(stage) + ": no task mixing weights");
  double sum = 0;
  for (const auto& [task, w] : mixing) {
    if (std::find(allowed.begin(), allowed.end(), task) == allowed.end()) {
      throw ValidationError("stage " + std::to_string(stage) + " does not allow task " + std::string(task_name(task)));
    }
    if (w < 0) throw ValidationError("stage " + std::to_string(stage) + ": negative mixing weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ValidationError("stage " + std::to_string(stage) + ": mixing weights sum to " + std::to_string(sum));
  }
}

dual_lm::LmInput MaskedModelInput::lm_input() const {
  return {video, text_ids, speaker_mel, audio_ids, speech_ids};
}

MaskedModelInput mask_for_task(const synthdata::MultimodalSample& sample, TaskKind task,
                               const frontend::BpeTokenizer& tokenizer) {
  const std::string tag = std::string(task_name(task));
  auto require = [&](bool ok, const char* field) {
    if (!ok) throw ValidationError("sample '" + sample.id + "' lacks " + field + " required by task " + tag);
  };
  const int steps = sample.steps();
  require(steps > 0, "tokens");
  const bool wants_video = task != TaskKind::tts;
  const bool wants_text = task != TaskKind::v2a;
  if (wants_video) require(sample.video.num_frames() > 0, "video");
  if (wants_text) {
    require(!sample.text.empty(), "transcript");
    require(!sample.speaker_mel.empty(), "speaker_mel");
  }
  if (task != TaskKind::tts) require(sample.tokens.audio_ids.size() == static_cast<std::size_t>(steps), "audio tokens");
  if (task != TaskKind::v2a) require(sample.tokens.speech_ids.size() == static_cast<std::size_t>(steps), "speech tokens");

  MaskedModelInput in;
  in.task = task;
  in.id = sample.id;
  if (wants_video) {
    in.video = frontend::resample_video(frontend::subsample_frames(sample.video, synthdata::kVideoStride), steps);
  } else {
    in.video = Tensor::matrix(steps, synthdata::kVideoDim);
  }
  if (wants_text) {
    in.text_ids = tokenizer.encode(sample.text).ids;
    Rng rng(derive_seed(sample.spec.seed, 0x5BEA4E7));
    in.speaker_mel = frontend::SpeakerEncoder::pool(
        frontend::SpeakerEncoder::random_crop(sample.speaker_mel, kSpeakerCropFrames, rng));
  } else {
    in.text_ids = tokenizer.encode(frontend::kVideoToAudioPrompt).ids;
    in.speaker_mel = Tensor::matrix(1, synthdata::kMelDim);
  }
  in.audio_head = task != TaskKind::tts;
  in.speech_head = task != TaskKind::v2a;
  if (in.audio_head) in.audio_ids = sample.tokens.audio_ids;
  if (in.speech_head) in.speech_ids = sample.tokens.speech_ids;
  return in;
}

StageLoss stage_loss(const dual_lm::DualLm& model, const std::vector<const MaskedModelInput*>& batch) {
  if (batch.empty()) throw ValidationError("stage_loss: empty batch");
  const TaskKind task = batch.front()->task;
  for (const auto* in : batch) {
    if (in->task != task) throw ValidationError("stage_loss: batch mixes tasks");
  }
  const bool audio_on = batch.front()->audio_head, speech_on = batch.front()->speech_head;
  const int pad = model.config().pad;

  std::vector<Var> audio_logits, speech_logits;
  std::vector<int> audio_targets, speech_targets;
  for (const auto* in : batch) {
    const auto logits = model.score(in->lm_input());
    if (audio_on) {
      audio_logits.push_back(logits.audio);
      audio_targets.insert(audio_targets.end(), in->audio_ids->begin(), in->audio_ids->end());
    }
    if (speech_on) {
      speech_logits.push_back(logits.speech);
      speech_targets.insert(speech_targets.end(), in->speech_ids->begin(), in->speech_ids->end());
    }
  }

  StageLoss out;
  std::vector<Var> terms;
  if (audio_on) {
    const auto ce = cross_entropy(ops::concat_rows(audio_logits), audio_targets, pad);
    out.audio_ce = ce.loss.item();
    out.audio_positions = ce.count;
    terms.push_back(ce.loss);
  }
  if (speech_on) {
    const auto ce = cross_entropy(ops::concat_rows(speech_logits), speech_targets, pad);
    out.speech_ce = ce.loss.item();
    out.speech_positions = ce.count;
    terms.push_back(ce.loss);
  }
  if (terms.empty()) throw ValidationError("stage_loss: both heads are disabled");
  out.heads_on = static_cast<int>(terms.size());
  out.total = terms.size() == 1 ? terms[0] : ops::add(terms[0], terms[1]);
  return out;
}

ModelSnapshot snapshot(const dual_lm::DualLm& model, int stage, std::int64_t step, std::uint64_t seed) {
  ModelSnapshot s{stage, step, seed, {}, model.params().snapshot()};
  for (const auto& p : model.params().params()) s.names.push_back(p.name);
  return s;
}

void restore(dual_lm::DualLm& model, const ModelSnapshot& snap) {
  const auto& list = model.params().params();
  if (snap.names.size() != list.size() || snap.values.size() != list.size()) {
    throw ValidationError("restore: snapshot has " + std::to_string(snap.values.size()) + " tensors, model has " +
                          std::to_string(list.size()));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (snap.names[i] != list[i].name || snap.values[i].shape() != list[i].var.value().shape()) {
      throw ValidationError("restore: tensor " + std::to_string(i) + " ('" + snap.names[i] +
                            "') does not match model parameter '" + list[i].name + "'");
    }
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    Var v = list[i].var;
    v.mutable_value().storage() = snap.values[i].storage();
  }
}

std::vector<double> StageResult::curve(TaskKind task) const {
  std::vector<double> out;
  for (const auto& r : log)
    if (r.task == task) out.push_back(r.loss);
  return out;
}

TaskSampler::TaskSampler(const std::map<TaskKind, double>& weights, std::uint64_t seed) : rng_(seed) {
  double total = 0;
  for (const auto& [task, w] : weights) total += w;
  if (!(total > 0)) throw ValidationError("TaskSampler: weights must have a positive sum");
  double acc = 0;
  for (const auto& [task, w] : weights) {
    if (w <= 0) continue;
    acc += w / total;
    cumulative_.emplace_back(task, acc);
  }
}

TaskKind TaskSampler::next() {
  const double u = rng_.uniform();
  for (const auto& [task, c] : cumulative_)
    if (u < c) return task;
  return cumulative_.back().first;
}

namespace {

// Epoch-style sampling without replacement within each task's corpus.
class BatchDrawer {
 public:
  BatchDrawer(const std::vector<MaskedModelInput>& items, std::uint64_t seed) : items_(&items), rng_(seed) {
    order_.resize(items.size());
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = order_.size();
  }

  std::vector<const MaskedModelInput*> draw(int n) {
    std::vector<const MaskedModelInput*> out;
    while (static_cast<int>(out.size()) < n) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_.engine());
        cursor_ = 0;
      }
      out.push_back(&(*items_)[order_[cursor_++]]);
    }
    return out;
  }

 private:
  const std::vector<MaskedModelInput>* items_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace

StageResult run_stage(const StageConfig& cfg, dual_lm::DualLm& model, const TaskData& data,
                      const std::optional<ModelSnapshot>& prior, int snapshot_every) {
  cfg.validate();
  if (cfg.stage > 1) {
    if (!prior || prior->stage != cfg.stage - 1) {
      throw ValidationError("stage " + std::to_string(cfg.stage) + ": missing prior checkpoint (stage " +
                            std::to_string(cfg.stage - 1) + ")");
    }
    restore(model, *prior);
  }
  std::map<TaskKind, BatchDrawer> drawers;
  for (const auto& [task, w] : cfg.mixing) {
    if (w <= 0) continue;
    auto it = data.find(task);
    if (it == data.end() || it->second.empty()) {
      throw ValidationError("stage " + std::to_string(cfg.stage) + ": no training data for task " +
                            std::string(task_name(task)));
    }
    for (const auto& in : it->second) {
      if (in.task != task) throw ValidationError("stage data for " + std::string(task_name(task)) + " holds another task");
    }
    drawers.emplace(task, BatchDrawer(it->second, derive_seed(cfg.seed, 0xBA7C0 + static_cast<int>(task))));
  }

  TaskSampler sampler(cfg.mixing, derive_seed(cfg.seed, 0x7A5C));
  AdamState opt(model.params());
  StageResult result;
  ModelSnapshot last_good = snapshot(model, cfg.stage, 0, cfg.seed);
  for (int step = 0; step < cfg.steps; ++step) {
    const TaskKind task = sampler.next();
    const auto batch = drawers.at(task).draw(cfg.batch_size);
    model.params().zero_grad();
    const auto loss = stage_loss(model, batch);
    const double value = loss.per_head();
    if (!std::isfinite(value)) {
      restore(model, last_good);
      result.checkpoint = last_good;
      result.aborted = true;
      result.abort_reason = "non-finite loss at step " + std::to_string(step) + "; restored step " +
                            std::to_string(last_good.step);
      spdlog::error("stage {}: {}", cfg.stage, result.abort_reason);
      return result;
    }
    loss.total.backward();
    clip_grad_norm(model.params(), cfg.grad_clip);
    const double lr = cosine_lr(step + 1, cfg.warmup_steps, cfg.lr_min, cfg.lr_max, cfg.steps);
    adam_step(model.params(), opt, lr);
    result.log.push_back({step, task, value, lr});
    if ((step + 1) % snapshot_every == 0) last_good = snapshot(model, cfg.stage, step + 1, cfg.seed);
    if ((step + 1) % 50 == 0) spdlog::debug("stage {} step {} {} loss {:.4f}", cfg.stage, step + 1, task_name(task), value);
  }
  result.checkpoint = snapshot(model, cfg.stage, cfg.steps, cfg.seed);
  return result;
}

std::map<TaskKind, double> forgetting_probe(const dual_lm::DualLm& model, const TaskData& heldout) {
  NoGradGuard guard;
  std::map<TaskKind, double> out;
  for (const auto& [task, items] : heldout) {
    if (items.empty()) continue;
    double sum = 0;
    for (const auto& in : items) sum += stage_loss(model, {&in}).per_head();
    out[task] = sum / static_cast<double>(items.size());
  }
  return out;
}

frontend::BpeTokenizer train_tokenizer(const std::vector<synthdata::MultimodalSample>& samples, int vocab_size) {
  std::vector<std::string> corpus;
  corpus.reserve(samples.size() + 1);
  for (const auto& s : samples) corpus.push_back(s.text);
  corpus.emplace_back(frontend::kVideoToAudioPrompt);
  return frontend::BpeTokenizer::train(corpus, vocab_size);
}

dual_lm::ModelConfig desk_model_config(int text_vocab) {
  dual_lm::ModelConfig c;
  c.codec_vocab = synthdata::kCodecVocab;
  c.text_vocab = text_vocab;
  c.video_dim = synthdata::kVideoDim;
  c.mel_dim = synthdata::kMelDim;
  c.audio_eos = synthdata::kAudioEos;
  c.speech_eos = synthdata::kSpeechEos;
  c.pad = synthdata::kPad;
  return c;
}

}  // namespace v2st::inline V2ST_REAL_NS::curriculum
