#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "v2st/dual_lm/model.hpp"
#include "v2st/frontend/bpe.hpp"
#include "v2st/synthdata/scene.hpp"

namespace v2st::inline V2ST_REAL_NS::curriculum {

enum class TaskKind { v2a, tts, v2st };

std::string_view task_name(TaskKind task);
// Accepts "v2a", "tts", "v2st" in any case. Throws ValidationError otherwise.
TaskKind parse_task(std::string_view name);
// Stage 1: {V2A}; stage 2: {V2A, TTS}; stage 3: all three.
std::vector<TaskKind> allowed_tasks(int stage);

// Learning-rate ranges per stage before the desk factor is applied.
struct LrRange {
  double min = 0;
  double max = 0;
};
LrRange paper_lr_range(int stage);

struct StageConfig {
  int stage = 1;
  double lr_min = 0;
  double lr_max = 0;
  int steps = 300;
  int warmup_steps = 30;
  int batch_size = 4;
  double grad_clip = 1.0;
  std::map<TaskKind, double> mixing;  // weight per allowed task
  std::uint64_t seed = 0;

  // Full-scale lr range times `desk_factor`; 1:1 mixing in stage 2 and 1:1:2 in
  // stage 3.
  static StageConfig defaults(int stage, double desk_factor);
  // Throws ValidationError for an unknown stage, a task the stage does not
  // allow, weights that do not sum to 1, or non-positive counts and rates.
  void validate() const;
};

// Conditioning and targets after the task's masking rules are applied.
struct MaskedModelInput {
  TaskKind task = TaskKind::v2st;
  std::string id;
  Tensor video;        // [T, d_v], rate-matched to the token length
  std::vector<int> text_ids;
  Tensor speaker_mel;  // pooled [1, d_mel]
  std::optional<std::vector<int>> audio_ids;   // absent means NULL inputs
  std::optional<std::vector<int>> speech_ids;
  bool audio_head = false;
  bool speech_head = false;

  int steps() const { return video.empty() ? 0 : video.rows(); }
  dual_lm::LmInput lm_input() const;
};

// Speaker prompt length used for pooling.
inline constexpr int kSpeakerCropFrames = 3 * synthdata::kTokenRate;

// V2A: real video, the fixed prompt, zero speaker, NULL speech inputs, audio
// head only. TTS: all-zero video rows, the transcript, the pooled speaker,
// NULL audio inputs, speech head only. V2ST: everything, both heads.
// Throws ValidationError naming the field and task when a needed field is
// empty.
MaskedModelInput mask_for_task(const synthdata::MultimodalSample& sample, TaskKind task,
                               const frontend::BpeTokenizer& tokenizer);

struct StageLoss {
  Var total;               // sum of the enabled heads' mean CE
  double audio_ce = 0;     // 0 when the head is off
  double speech_ce = 0;
  int audio_positions = 0;
  int speech_positions = 0;
  int heads_on = 0;
  // Mean CE per enabled head.
  double per_head() const { return heads_on ? total.item() / heads_on : 0.0; }
};

// CE over enabled heads only, averaged over non-PAD positions of the whole
// batch. A disabled head is not part of the graph, so its parameters get no
// gradient. Throws ValidationError for an empty or mixed-task batch.
StageLoss stage_loss(const dual_lm::DualLm& model, const std::vector<const MaskedModelInput*>& batch);

struct ModelSnapshot {
  int stage = 0;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<Tensor> values;
};

ModelSnapshot snapshot(const dual_lm::DualLm& model, int stage, std::int64_t step, std::uint64_t seed);
// Throws ValidationError when names or shapes differ from the model.
void restore(dual_lm::DualLm& model, const ModelSnapshot& snap);

struct StepRecord {
  std::int64_t step = 0;
  TaskKind task = TaskKind::v2a;
  double loss = 0;  // mean CE per enabled head
  double lr = 0;
};

struct StageResult {
  ModelSnapshot checkpoint;  // the final state, or the last good one after an abort
  std::vector<StepRecord> log;
  bool aborted = false;
  std::string abort_reason;

  // Loss records of one task in step order.
  std::vector<double> curve(TaskKind task) const;
};

using TaskData = std::map<TaskKind, std::vector<MaskedModelInput>>;

// Seeded task sampler: draws a task with probability proportional to its
// mixing weight.
class TaskSampler {
 public:
  TaskSampler(const std::map<TaskKind, double>& weights, std::uint64_t seed);
  TaskKind next();

 private:
  std::vector<std::pair<TaskKind, double>> cumulative_;
  Rng rng_;
};

// Trains one stage. Stage s > 1 starts from `prior`, which must carry stage
// s - 1 (ValidationError "missing prior checkpoint" otherwise). Every step
// uses one task-homogeneous batch. A non-finite loss restores the last good
// snapshot (taken every `snapshot_every` steps) and returns aborted = true.
StageResult run_stage(const StageConfig& cfg, dual_lm::DualLm& model, const TaskData& data,
                      const std::optional<ModelSnapshot>& prior, int snapshot_every = 50);

// Teacher-forced mean CE per enabled head for each task's held-out set.
// Read-only: parameters and gradients are untouched.
std::map<TaskKind, double> forgetting_probe(const dual_lm::DualLm& model, const TaskData& heldout);

// Tokenizer trained on the transcripts plus the V2A prompt.
frontend::BpeTokenizer train_tokenizer(const std::vector<synthdata::MultimodalSample>& samples, int vocab_size);

// Model config sized for the synthetic corpus.
dual_lm::ModelConfig desk_model_config(int text_vocab);

}  // namespace v2st::inline V2ST_REAL_NS::curriculum
