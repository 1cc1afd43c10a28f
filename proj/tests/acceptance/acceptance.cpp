// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "grad_checks.hpp"
#include "v2st/flow_decoder/flow.hpp"
#include "v2st/harness/config.hpp"
#include "v2st/harness/pipeline.hpp"
#include "v2st/harness/selftest.hpp"
#include "v2st/metrics/distribution.hpp"
#include "v2st/metrics/signal.hpp"

using namespace v2st;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Outcome = std::pair<bool, std::string>;

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& measured) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " [" << measured << "]" << std::endl;
  if (!pass) ++failures;
}

// Runs one criterion; an exception counts as a failure.
void criterion(int id, const std::string& what, const std::function<Outcome()>& body) {
  try {
    const auto [pass, measured] = body();
    report(id, pass, what, measured);
  } catch (const std::exception& e) {
    report(id, false, what, std::string("threw: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string strf(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("v2st_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);

  criterion(1, "invariant suite passes in under 2 minutes", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = harness::run_selftest();
    const double secs = seconds_since(t0);
    int passed = 0;
    std::string failed;
    for (const auto& r : results) {
      passed += r.passed;
      if (!r.passed) failed += " " + r.name + "(" + r.detail + ")";
    }
    const bool ok = passed == static_cast<int>(results.size()) && secs < 120;
    return Outcome{ok, std::to_string(passed) + "/" + std::to_string(results.size()) + " checks, " +
                             strf("%.2f s", secs) + failed};
  });

  criterion(2, "aligner+LM loss and fm_loss gradients match central differences (rel err < 1e-3, >= 5 instances)", [] {
    const auto s = run_grad_checks();
    const bool ok = s.lm_instances >= 5 && s.fm_instances >= 5 && s.lm_max_rel_error < 1e-3 && s.fm_max_rel_error < 1e-3;
    return Outcome{ok, strf("LM %.0f instances max %.2e; FM %.0f instances max %.2e", s.lm_instances,
                             s.lm_max_rel_error, s.fm_instances, s.fm_max_rel_error)};
  });

  // Criteria 3, 4, 5 and 7 read one desk-profile pipeline run.
  harness::RunContext desk;
  desk.cfg = harness::RunConfig::desk();
  desk.out = fresh_dir("desk");
  json rep;
  double curriculum_secs = 0;
  std::string pipeline_error;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    harness::run_synth(desk);
    const auto tc = std::chrono::steady_clock::now();
    for (int s = 1; s <= 3; ++s) harness::run_train_stage(desk, s);
    curriculum_secs = seconds_since(tc);
    harness::run_vae_train(desk);
    harness::run_flow_train(desk);
    harness::run_casp_train(desk);
    harness::run_generate(desk);
    rep = harness::run_eval(desk);
    std::cout << "desk pipeline finished in " << strf("%.0f s", seconds_since(t0)) << ", report at "
              << (desk.out / "report.json").string() << std::endl;
  } catch (const std::exception& e) {
    pipeline_error = e.what();
    std::cout << "desk pipeline failed: " << pipeline_error << std::endl;
  }
  auto need_report = [&] {
    if (rep.is_null()) throw std::runtime_error("no desk report: " + pipeline_error);
  };

  criterion(3, "stage-final CE <= 0.5 ln V, retention <= 1.25x, curriculum < 15 min", [&] {
    need_report();
    const auto& c = rep.at("curriculum");
    const double half = 0.5 * c.at("ln_codec_vocab").get<double>();
    const double v2a = c.at("stage1_v2a_train_ce").get<double>(), tts = c.at("stage2_tts_train_ce").get<double>();
    const double rv = c.at("retention").at("v2a").get<double>(), rt = c.at("retention").at("tts").get<double>();
    const bool ok = v2a <= half && tts <= half && rv <= 1.25 && rt <= 1.25 && curriculum_secs < 900;
    return Outcome{ok, strf("stage-1 V2A %.3f, stage-2 TTS %.3f (limit %.3f); ", v2a, tts, half) +
                             strf("retention V2A %.3f, TTS %.3f; %.0f s", rv, rt, curriculum_secs)};
  });

  criterion(4, "greedy recall on the stage-3 training set >= 90% per stream", [&] {
    need_report();
    const double a = rep.at("recall").at("train").at("audio").get<double>();
    const double s = rep.at("recall").at("train").at("speech").get<double>();
    return Outcome{a >= 0.9 && s >= 0.9, strf("audio %.3f, speech %.3f", a, s)};
  });

  criterion(5, "flow latent recovery < 0.15 at 32 Euler steps; exp-ODE Euler within 0.2% of e at 1024 steps", [&] {
    need_report();
    const double rec = rep.at("flow").at("recovery_error").get<double>();
    const int steps = rep.at("flow").at("euler_steps").get<int>();
    const flow_decoder::VelocityFn identity = [](const Var& z, double) { return z; };
    const double e1024 = flow_decoder::integrate(identity, Tensor::scalar(1.0f), 1024)[0];
    const double rel = std::abs(e1024 - std::exp(1.0)) / std::exp(1.0);
    return Outcome{rec < 0.15 && steps == 32 && rel < 2e-3,
                     strf("recovery %.4f at %.0f steps; Euler %.6f (rel err %.2e)", rec, steps, e1024, rel)};
  });

  criterion(6, "metric oracles: frechet 1-D, inception score, KL, AV-Align", [] {
    using metrics::GaussianStats;
    const double f1 = metrics::frechet(GaussianStats{{0.0}, {1.0}}, GaussianStats{{1.0}, {1.0}});
    const double f2 = metrics::frechet(GaussianStats{{0.0}, {1.0}}, GaussianStats{{0.0}, {4.0}});
    const int C = 5;
    metrics::Rows onehot(C, std::vector<double>(C, 0.0)), uniform(C, std::vector<double>(C, 1.0 / C));
    for (int i = 0; i < C; ++i) onehot[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    const double is_uniform = metrics::inception_score(uniform), is_onehot = metrics::inception_score(onehot);
    const double kl_same = metrics::kl_metric(onehot, onehot), kl_c = metrics::kl_metric(uniform, onehot);
    const double a1 = metrics::av_align({{1.0, 2.0}}, {{1.0, 2.0}}, 0.1);
    const double a0 = metrics::av_align({{1.0, 2.0}}, {{3.0, 4.0}}, 0.1);
    const double a3 = metrics::av_align({{1.0, 2.0}}, {{1.0, 3.0}}, 0.1);
    const bool ok = std::abs(f1 - 1) < 1e-6 && std::abs(f2 - 1) < 1e-6 && std::abs(is_uniform - 1) < 1e-9 &&
                    std::abs(is_onehot - C) < 1e-9 && std::abs(kl_same) < 1e-9 &&
                    std::abs(kl_c - std::log(C)) < 1e-9 && a1 == 1.0 && a0 == 0.0 && a3 == 1.0 / 3.0;
    std::ostringstream m;
    m.precision(10);
    m << "FD " << f1 << ", " << f2 << "; IS " << is_uniform << ", " << is_onehot << "; KL " << kl_same << ", " << kl_c
      << "; AV " << a1 << ", " << a0 << ", " << a3;
    return Outcome{ok, m.str()};
  });

  criterion(7, "CASP retrieval on 100 held-out pairs: top-1 >= 0.90, top-3 >= 0.97", [&] {
    need_report();
    const auto& r = rep.at("retrieval");
    const double t1 = r.at("top1").get<double>(), t3 = r.at("top3").get<double>();
    const int pairs = r.at("pairs").get<int>();
    const bool ref = rep.at("paper_reference").at("casp_top1").get<double>() == 0.70;
    return Outcome{t1 >= 0.90 && t3 >= 0.97 && pairs == 100 && ref,
                     strf("top-1 %.2f, top-3 %.2f, top-5 %.2f on %.0f pairs", t1, t3, r.at("top5").get<double>(), pairs)};
  });

  criterion(8, "energy filter keeps a track at exactly -40 dB and discards -50 dB speech", [] {
    const std::vector<float> loud(256, 0.1f);
    const std::vector<float> quiet(256, static_cast<float>(std::pow(10.0, -2.5)));
    // The smallest float amplitude whose energy is not below -40 dB.
    float a = 0.0099f;
    while (metrics::energy_db(std::vector<float>(256, a)) < -40.0) a = std::nextafter(a, 1.0f);
    const std::vector<float> at40(256, a);
    const std::vector<float> below40(256, std::nextafter(a, 0.0f));
    const double e40 = metrics::energy_db(at40);
    const bool ok = std::abs(e40 + 40.0) < 1e-5 && metrics::filter_pair(at40, loud) && metrics::filter_pair(loud, at40) &&
                    metrics::filter_pair(at40, at40, e40) && !metrics::filter_pair(below40, loud) &&
                    !metrics::filter_pair(loud, quiet) && !metrics::filter_pair(at40, quiet);
    return Outcome{ok, strf("boundary track %.7f dB kept; -50 dB speech %.3f dB discarded", e40, metrics::energy_db(quiet))};
  });

  criterion(9, "two pipeline runs with the same seed and config give byte-identical reports", [] {
    harness::RunContext a, b;
    a.cfg = b.cfg = harness::load_config(fs::path(V2ST_SOURCE_DIR) / "configs" / "smoke.json");
    a.out = fresh_dir("det_a");
    b.out = fresh_dir("det_b");
    harness::run_pipeline(a);
    harness::run_pipeline(b);
    const auto ra = harness::read_bytes(a.out / "report.json"), rb = harness::read_bytes(b.out / "report.json");
    return Outcome{!ra.empty() && ra == rb, std::to_string(ra.size()) + " vs " + std::to_string(rb.size()) + " bytes"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
