#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "v2st/harness/config.hpp"
#include "v2st/harness/pipeline.hpp"
#include "v2st/harness/selftest.hpp"

using namespace v2st;

namespace {

int run(CLI::App& app, int argc, char** argv) {
  std::string config_path, out_dir = "run", log_level = "info";
  std::optional<std::uint64_t> seed;
  bool force = false;
  int stage = 0;

  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", config_path, "JSON config; defaults to the built-in desk profile")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Root seed, overrides the config");
  app.add_option("--out", out_dir, "Run directory")->capture_default_str();
  app.add_flag("--force", force, "Load checkpoints written under a different config");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  auto* train = app.add_subcommand("train", "Run one curriculum stage");
  train->add_option("--stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  auto* vae = app.add_subcommand("vae-train", "Train and freeze the waveform VAE");
  auto* flow = app.add_subcommand("flow-train", "Train the flow-matching velocity field");
  auto* casp = app.add_subcommand("casp-train", "Train the audio-speech contrastive model");
  auto* gen = app.add_subcommand("generate", "Generate soundtracks for the held-out scenes");
  auto* eval = app.add_subcommand("eval", "Write the evaluation report");
  auto* pipeline = app.add_subcommand("pipeline", "synth, train stages 1-3, vae, flow, casp, generate, eval");
  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");
  auto* show = app.add_subcommand("show-config", "Print the resolved config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  spdlog::set_default_logger(spdlog::stderr_logger_mt("v2st"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (selftest->parsed()) {
    bool ok = true;
    for (const auto& r : harness::run_selftest()) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : ": " + r.detail) << "\n";
      ok = ok && r.passed;
    }
    return ok ? 0 : 2;
  }

  harness::RunContext ctx;
  ctx.cfg = config_path.empty() ? harness::RunConfig::desk() : harness::load_config(config_path);
  if (seed) ctx.cfg.seed = *seed;
  ctx.out = out_dir;
  ctx.force = force;

  if (show->parsed()) {
    std::cout << ctx.cfg.to_json().dump(2) << "\n";
  } else if (synth->parsed()) {
    harness::run_synth(ctx);
  } else if (train->parsed()) {
    harness::run_train_stage(ctx, stage);
  } else if (vae->parsed()) {
    harness::run_vae_train(ctx);
  } else if (flow->parsed()) {
    harness::run_flow_train(ctx);
  } else if (casp->parsed()) {
    harness::run_casp_train(ctx);
  } else if (gen->parsed()) {
    harness::run_generate(ctx);
  } else if (eval->parsed()) {
    std::cout << harness::report_text(harness::run_eval(ctx));
  } else if (pipeline->parsed()) {
    std::cout << harness::report_text(harness::run_pipeline(ctx));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-to-soundtrack desk-scale toolkit"};
  try {
    return run(app, argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
