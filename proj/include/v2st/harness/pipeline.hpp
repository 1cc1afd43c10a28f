#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "v2st/harness/config.hpp"
#include "v2st/harness/io.hpp"
#include "v2st/synthdata/scene.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

// Everything a subcommand needs. All artifacts live under `out`:
//   config.json, data/, checkpoints/, logs/, generated/, report.json
struct RunContext {
  RunConfig cfg;
  fs::path out;
  bool force = false;  // accept checkpoints written under a different config
};

// Writes the dataset: the paired train/eval scenes with their manifests, the
// tokenizer, and the CASP feature pairs.
void run_synth(const RunContext& ctx);
// One curriculum stage; stage s > 1 resumes from the stage s - 1 checkpoint.
void run_train_stage(const RunContext& ctx, int stage);
void run_vae_train(const RunContext& ctx);
void run_flow_train(const RunContext& ctx);
void run_casp_train(const RunContext& ctx);
// Token streams for every held-out scene via greedy dual-head decoding, then
// waveforms through the flow decoder and the frozen VAE.
void run_generate(const RunContext& ctx);
// Writes report.json and returns it.
nlohmann::json run_eval(const RunContext& ctx);
// synth, stages 1-3, vae, flow, casp, generate, eval.
nlohmann::json run_pipeline(const RunContext& ctx);

// Scenes as written by run_synth.
std::vector<synthdata::MultimodalSample> load_samples(const fs::path& manifest);

// Serialized EvalReport: two-space indented JSON with a trailing newline.
std::string report_text(const nlohmann::json& report);

}  // namespace v2st::inline V2ST_REAL_NS::harness
