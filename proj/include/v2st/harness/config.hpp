#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "v2st/curriculum/curriculum.hpp"
#include "v2st/dual_lm/model.hpp"
#include "v2st/flow_decoder/flow.hpp"
#include "v2st/metrics/casp.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

struct DataConfig {
  int train = 32;
  int eval = 32;
  int casp_train = 1024;
  int casp_eval = 100;
  int tokenizer_vocab = 320;
};

struct GenerateConfig {
  int euler_steps = 32;
};

struct EvalThresholds {
  double casp_top1 = 0.90;
  double casp_top3 = 0.97;
  double flow_recovery = 0.15;
  double train_recall = 0.90;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;
  DataConfig data;
  dual_lm::ModelConfig model;
  double desk_factor = 10.0;
  std::array<curriculum::StageConfig, 3> stages;
  flow_decoder::VaeConfig vae;
  flow_decoder::FlowConfig flow;
  metrics::CaspConfig casp;
  GenerateConfig generate;
  EvalThresholds thresholds;

  // Built-in desk defaults.
  static RunConfig desk();
  nlohmann::json to_json() const;
  // Missing keys keep the desk defaults; unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  // FNV-1a of the canonical JSON dump.
  std::string hash() const;
  // Throws ValidationError for values no component accepts.
  void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);

}  // namespace v2st::inline V2ST_REAL_NS::harness
