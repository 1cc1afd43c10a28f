#include "v2st/harness/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "v2st/curriculum/curriculum.hpp"
#include "v2st/dual_lm/generate.hpp"
#include "v2st/flow_decoder/flow.hpp"
#include "v2st/metrics/casp.hpp"
#include "v2st/metrics/distribution.hpp"
#include "v2st/metrics/signal.hpp"
#include "v2st/synthdata/features.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

using nlohmann::json;
using curriculum::TaskKind;

namespace {

// Stream tags for derive_seed.
enum SeedTag : std::uint64_t {
  kSeedData = 1,
  kSeedCaspData = 2,
  kSeedModel = 3,
  kSeedStage = 10,
  kSeedVae = 20,
  kSeedTable = 21,
  kSeedFlowNet = 22,
  kSeedFlow = 23,
  kSeedCasp = 30,
  kSeedGenerate = 40,
};

std::uint64_t seed_for(const RunContext& ctx, std::uint64_t tag) { return derive_seed(ctx.cfg.seed, tag); }

fs::path data_dir(const RunContext& ctx) { return ctx.out / "data"; }
fs::path ckpt_path(const RunContext& ctx, const std::string& name) { return ctx.out / "checkpoints" / (name + ".ckpt"); }
fs::path log_path(const RunContext& ctx, const std::string& name) { return ctx.out / "logs" / (name + ".json"); }
std::string stage_name(int stage) { return "stage" + std::to_string(stage); }

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

Checkpoint open_checkpoint(const RunContext& ctx, const fs::path& path, const std::string& kind) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.header.value("kind", std::string{}) != kind) {
    throw ValidationError(path.string() + " is not a " + kind + " checkpoint");
  }
  const std::string stored = ckpt.header.value("config_hash", std::string{});
  const std::string current = ctx.cfg.hash();
  if (stored != current) {
    if (!ctx.force) {
      throw ValidationError(path.string() + " was written under config " + stored + ", current config is " + current +
                            "; pass --force to load it anyway");
    }
    spdlog::warn("{} was written under config {}, current config is {}; continuing because of --force", path.string(),
                 stored, current);
  }
  return ckpt;
}

json base_header(const RunContext& ctx, const std::string& kind, std::uint64_t seed) {
  return {{"kind", kind}, {"config_hash", ctx.cfg.hash()}, {"seed", seed}};
}

void write_sample(const fs::path& root, const std::string& rel_dir, const synthdata::MultimodalSample& m,
                  ManifestEntry& e) {
  auto put = [&](const std::string& role, const Tensor& t) {
    const std::string rel = rel_dir + "/" + role + ".ddtf";
    save_tensor(root / rel, t);
    e.files[role] = rel;
  };
  put("video", m.video.frames);
  put("speaker_mel", m.speaker_mel);
  put("audio_ids", ids_tensor(m.tokens.audio_ids));
  put("speech_ids", ids_tensor(m.tokens.speech_ids));
  put("audio_wave", wave_tensor(m.audio_wave));
  put("speech_wave", wave_tensor(m.speech_wave));
}

ManifestEntry sample_entry(const synthdata::MultimodalSample& m) {
  ManifestEntry e;
  e.id = m.id;
  e.tasks = {"v2a", "tts", "v2st"};
  e.transcript = m.text;
  e.speaker = m.spec.speaker;
  e.duration_s = m.spec.duration_s;
  json events = json::array();
  for (const auto& ev : m.spec.events) events.push_back({{"onset_s", ev.onset_s}, {"cls", ev.cls}});
  e.extra = {{"seed", m.spec.seed}, {"ambience", m.spec.ambience}, {"events", events}, {"fps", m.video.fps}};
  return e;
}

void synth_split(const fs::path& root, const std::string& name, const std::vector<synthdata::SceneSpec>& specs,
                 std::vector<synthdata::MultimodalSample>* keep) {
  std::vector<ManifestEntry> entries;
  for (const auto& spec : specs) {
    auto m = synthdata::gen_scene(spec);
    ManifestEntry e = sample_entry(m);
    write_sample(root, name + "/" + m.id, m, e);
    entries.push_back(std::move(e));
    if (keep) keep->push_back(std::move(m));
  }
  save_manifest(root / (name + ".jsonl"), entries);
}

void synth_casp(const fs::path& root, const std::string& name, const std::vector<synthdata::SceneSpec>& specs) {
  std::vector<ManifestEntry> entries;
  for (const auto& spec : specs) {
    const auto m = synthdata::gen_scene(spec);
    ManifestEntry e;
    e.id = m.id;
    e.tasks = {"casp"};
    e.transcript = m.text;
    e.speaker = m.spec.speaker;
    e.duration_s = m.spec.duration_s;
    for (const auto& [role, wave] : {std::pair{"audio", &m.audio_wave}, std::pair{"speech", &m.speech_wave}}) {
      const std::string rel = name + "/" + m.id + "_" + role + ".ddtf";
      save_tensor(root / rel, synthdata::casp_features(*wave));
      e.files[role] = rel;
    }
    entries.push_back(std::move(e));
  }
  save_manifest(root / (name + ".jsonl"), entries);
}

std::vector<metrics::CaspPair> load_casp_pairs(const fs::path& manifest) {
  std::vector<metrics::CaspPair> pairs;
  for (const auto& e : load_manifest(manifest)) {
    pairs.push_back({load_tensor(resolve(manifest, e, "audio")), load_tensor(resolve(manifest, e, "speech"))});
  }
  return pairs;
}

frontend::BpeTokenizer load_tokenizer(const RunContext& ctx) {
  return frontend::BpeTokenizer::from_json(read_json(data_dir(ctx) / "tokenizer.json"));
}

dual_lm::ModelConfig model_config(const RunContext& ctx, int text_vocab) {
  dual_lm::ModelConfig mc = ctx.cfg.model;
  const dual_lm::ModelConfig fixed = curriculum::desk_model_config(text_vocab);
  mc.codec_vocab = fixed.codec_vocab;
  mc.text_vocab = fixed.text_vocab;
  mc.video_dim = fixed.video_dim;
  mc.mel_dim = fixed.mel_dim;
  mc.audio_eos = fixed.audio_eos;
  mc.speech_eos = fixed.speech_eos;
  mc.pad = fixed.pad;
  return mc;
}

curriculum::ModelSnapshot to_snapshot(const Checkpoint& ckpt) {
  curriculum::ModelSnapshot s;
  s.stage = ckpt.header.at("stage").get<int>();
  s.step = ckpt.header.at("step").get<std::int64_t>();
  s.seed = ckpt.header.at("seed").get<std::uint64_t>();
  for (const auto& [name, t] : ckpt.tensors) {
    s.names.push_back(name);
    s.values.push_back(t);
  }
  return s;
}

struct LoadedLm {
  frontend::BpeTokenizer tokenizer;
  std::unique_ptr<dual_lm::DualLm> model;
};

LoadedLm load_lm(const RunContext& ctx, int stage) {
  const fs::path path = ckpt_path(ctx, stage_name(stage));
  if (!fs::exists(path)) {
    throw ValidationError("missing prior checkpoint (stage " + std::to_string(stage) + ") at " + path.string());
  }
  const Checkpoint ckpt = open_checkpoint(ctx, path, "dual_lm");
  LoadedLm out;
  out.tokenizer = frontend::BpeTokenizer::from_json(ckpt.header.at("tokenizer"));
  out.model = std::make_unique<dual_lm::DualLm>(model_config(ctx, out.tokenizer.vocab_size()), 0);
  curriculum::restore(*out.model, to_snapshot(ckpt));
  return out;
}

flow_decoder::ToyVae load_vae(const RunContext& ctx) {
  const Checkpoint ckpt = open_checkpoint(ctx, ckpt_path(ctx, "vae"), "vae");
  flow_decoder::ToyVae vae(ctx.cfg.vae);
  take_params(ckpt, vae.params());
  vae.freeze();
  return vae;
}

struct LoadedFlow {
  flow_decoder::TokenLatentTable table;
  flow_decoder::VelocityField field;
};

LoadedFlow load_flow(const RunContext& ctx, int latent_dim) {
  const Checkpoint ckpt = open_checkpoint(ctx, ckpt_path(ctx, "flow"), "flow");
  LoadedFlow f{flow_decoder::TokenLatentTable(synthdata::kCodecVocab, latent_dim,
                                              ckpt.header.at("table_seed").get<std::uint64_t>()),
               flow_decoder::VelocityField(latent_dim, ctx.cfg.flow.net, 0)};
  take_params(ckpt, f.field.params());
  return f;
}

std::unique_ptr<metrics::CaspModel> load_casp(const RunContext& ctx) {
  const Checkpoint ckpt = open_checkpoint(ctx, ckpt_path(ctx, "casp"), "casp");
  metrics::CaspConfig cc = ctx.cfg.casp;
  cc.feature_dim = synthdata::kCaspFeatureDim;
  auto model = std::make_unique<metrics::CaspModel>(cc);
  take_params(ckpt, model->params());
  return model;
}

// Content tokens: everything before the stream's EOS.
std::vector<int> content(const std::vector<int>& ids, int eos) {
  std::vector<int> out;
  for (int id : ids) {
    if (id == eos) break;
    out.push_back(id);
  }
  return out;
}

// Flow items for both streams of every scene, latents from the frozen VAE.
std::vector<flow_decoder::FlowItem> flow_items(const std::vector<synthdata::MultimodalSample>& samples,
                                               const flow_decoder::ToyVae& vae) {
  std::vector<flow_decoder::FlowItem> items;
  for (const auto& m : samples) {
    items.push_back({content(m.tokens.audio_ids, synthdata::kAudioEos), vae.encode_mean(m.audio_wave).z});
    items.push_back({content(m.tokens.speech_ids, synthdata::kSpeechEos), vae.encode_mean(m.speech_wave).z});
  }
  return items;
}

std::vector<float> decode_tokens(const std::vector<int>& ids, const LoadedFlow& flow, const flow_decoder::ToyVae& vae,
                                 int euler_steps) {
  if (ids.empty()) return std::vector<float>(flow_decoder::kFrameSamples, 0.0f);
  const auto z0 = flow_decoder::tokens_to_z0(flow.table, ids, static_cast<int>(ids.size()));
  const Tensor z = flow_decoder::integrate(flow.field.fn(), z0.z, euler_steps);
  return flow_decoder::decode_waveform(z, vae);
}

dual_lm::Generation greedy_v2st(const dual_lm::DualLm& model, const synthdata::MultimodalSample& m,
                                const curriculum::MaskedModelInput& in, std::uint64_t seed) {
  dual_lm::GenerateRequest req;
  req.video = frontend::subsample_frames(m.video, synthdata::kVideoStride);
  req.text_ids = in.text_ids;
  req.speaker_mel = in.speaker_mel;
  req.max_steps = in.steps();
  req.sampling = dual_lm::Sampling::greedy();
  req.seed = seed;
  return dual_lm::generate(model, req);
}

struct Recall {
  double audio = 0;
  double speech = 0;
};

// Fraction of ground-truth positions (EOS included) reproduced per stream.
Recall token_recall(const std::vector<std::vector<int>>& gen_audio, const std::vector<std::vector<int>>& gen_speech,
                    const std::vector<synthdata::MultimodalSample>& truth) {
  double ha = 0, hs = 0, n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& ta = truth[i].tokens.audio_ids;
    const auto& ts = truth[i].tokens.speech_ids;
    for (std::size_t t = 0; t < ta.size(); ++t) {
      ha += t < gen_audio[i].size() && gen_audio[i][t] == ta[t];
      hs += t < gen_speech[i].size() && gen_speech[i][t] == ts[t];
    }
    n += static_cast<double>(ta.size());
  }
  return {n > 0 ? ha / n : 0.0, n > 0 ? hs / n : 0.0};
}

json task_map(const std::map<TaskKind, double>& m) {
  json j = json::object();
  for (const auto& [task, v] : m) j[std::string(curriculum::task_name(task))] = v;
  return j;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Clips shorter than three frames have no interior peaks.
metrics::PeakList audio_peaks(std::span<const float> wave) {
  const auto env = synthdata::audio_envelope(wave);
  if (env.size() < 3) return {};
  return metrics::detect_peaks_normalized(env, synthdata::kTokenRate);
}

metrics::PeakList video_peaks(const frontend::VideoFeatureSeq& video) {
  return metrics::detect_peaks_normalized(synthdata::video_envelope(video.frames), video.fps);
}

}  // namespace

std::vector<synthdata::MultimodalSample> load_samples(const fs::path& manifest) {
  std::vector<synthdata::MultimodalSample> out;
  for (const auto& e : load_manifest(manifest)) {
    synthdata::MultimodalSample m;
    m.id = e.id;
    m.text = e.transcript;
    m.spec.transcript = e.transcript;
    m.spec.speaker = e.speaker;
    m.spec.duration_s = e.duration_s;
    m.spec.seed = e.extra.value("seed", std::uint64_t{0});
    m.spec.ambience = e.extra.value("ambience", 0);
    if (e.extra.contains("events")) {
      for (const auto& ev : e.extra.at("events")) {
        m.spec.events.push_back({ev.at("onset_s").get<double>(), ev.at("cls").get<int>()});
      }
    }
    m.video.frames = load_tensor(resolve(manifest, e, "video"));
    m.video.fps = e.extra.value("fps", static_cast<double>(synthdata::kVideoFps));
    m.speaker_mel = load_tensor(resolve(manifest, e, "speaker_mel"));
    m.tokens.audio_ids = tensor_ids(load_tensor(resolve(manifest, e, "audio_ids")));
    m.tokens.speech_ids = tensor_ids(load_tensor(resolve(manifest, e, "speech_ids")));
    m.audio_wave = tensor_wave(load_tensor(resolve(manifest, e, "audio_wave")));
    m.speech_wave = tensor_wave(load_tensor(resolve(manifest, e, "speech_wave")));
    out.push_back(std::move(m));
  }
  return out;
}

std::string report_text(const json& report) { return report.dump(2) + "\n"; }

void run_synth(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const fs::path root = data_dir(ctx);
  const auto& d = ctx.cfg.data;
  const auto split = synthdata::gen_split(d.train, d.eval, seed_for(ctx, kSeedData));
  std::vector<synthdata::MultimodalSample> train;
  synth_split(root, "train", split.train, &train);
  synth_split(root, "eval", split.eval, nullptr);
  const auto tokenizer = curriculum::train_tokenizer(train, d.tokenizer_vocab);
  write_json(root / "tokenizer.json", tokenizer.to_json());
  const auto casp = synthdata::gen_split(d.casp_train, d.casp_eval, seed_for(ctx, kSeedCaspData));
  synth_casp(root, "casp_train", casp.train);
  synth_casp(root, "casp_eval", casp.eval);
  write_json(ctx.out / "config.json", ctx.cfg.to_json());
  spdlog::info("synth: {} train, {} eval, {}+{} casp pairs, tokenizer vocab {} ({:.1f} s)", d.train, d.eval,
               d.casp_train, d.casp_eval, tokenizer.vocab_size(), timer.seconds());
}

void run_train_stage(const RunContext& ctx, int stage) {
  ctx.cfg.validate();
  if (stage < 1 || stage > 3) throw ValidationError("--stage must be 1, 2 or 3");
  Timer timer;
  std::optional<curriculum::ModelSnapshot> prior;
  frontend::BpeTokenizer tokenizer;
  if (stage > 1) {
    const fs::path prev = ckpt_path(ctx, stage_name(stage - 1));
    if (!fs::exists(prev)) {
      throw ValidationError("stage " + std::to_string(stage) + ": missing prior checkpoint (stage " +
                            std::to_string(stage - 1) + ") at " + prev.string());
    }
    const Checkpoint ckpt = open_checkpoint(ctx, prev, "dual_lm");
    tokenizer = frontend::BpeTokenizer::from_json(ckpt.header.at("tokenizer"));
    prior = to_snapshot(ckpt);
  } else {
    tokenizer = load_tokenizer(ctx);
  }
  const auto train = load_samples(data_dir(ctx) / "train.jsonl");
  const auto held = load_samples(data_dir(ctx) / "eval.jsonl");
  curriculum::TaskData train_data, held_data;
  for (TaskKind task : curriculum::allowed_tasks(stage)) {
    for (const auto& m : train) train_data[task].push_back(curriculum::mask_for_task(m, task, tokenizer));
    for (const auto& m : held) held_data[task].push_back(curriculum::mask_for_task(m, task, tokenizer));
  }

  dual_lm::DualLm model(model_config(ctx, tokenizer.vocab_size()), seed_for(ctx, kSeedModel));
  curriculum::StageConfig sc = ctx.cfg.stages[static_cast<std::size_t>(stage - 1)];
  sc.stage = stage;
  sc.seed = seed_for(ctx, kSeedStage + static_cast<std::uint64_t>(stage));
  const auto result = curriculum::run_stage(sc, model, train_data, prior);
  if (result.aborted) throw NumericError("stage " + std::to_string(stage) + " aborted: " + result.abort_reason);

  Checkpoint ckpt;
  ckpt.header = base_header(ctx, "dual_lm", result.checkpoint.seed);
  ckpt.header["stage"] = stage;
  ckpt.header["step"] = result.checkpoint.step;
  ckpt.header["tokenizer"] = tokenizer.to_json();
  for (std::size_t i = 0; i < result.checkpoint.names.size(); ++i) {
    ckpt.tensors.emplace_back(result.checkpoint.names[i], result.checkpoint.values[i]);
  }
  save_checkpoint(ckpt_path(ctx, stage_name(stage)), ckpt);

  json steps = json::array();
  for (const auto& r : result.log) {
    steps.push_back({{"step", r.step}, {"task", curriculum::task_name(r.task)}, {"loss", r.loss}, {"lr", r.lr}});
  }
  const auto probe_train = curriculum::forgetting_probe(model, train_data);
  const auto probe_held = curriculum::forgetting_probe(model, held_data);
  write_json(log_path(ctx, stage_name(stage)),
             {{"stage", stage}, {"steps", steps}, {"probe_train", task_map(probe_train)},
              {"probe_heldout", task_map(probe_held)}});
  spdlog::info("stage {}: {} steps, train CE {}, held-out CE {} ({:.1f} s)", stage, sc.steps,
               task_map(probe_train).dump(), task_map(probe_held).dump(), timer.seconds());
}

void run_vae_train(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const auto train = load_samples(data_dir(ctx) / "train.jsonl");
  std::vector<std::vector<float>> waves;
  for (const auto& m : train) {
    waves.push_back(m.audio_wave);
    waves.push_back(m.speech_wave);
  }
  flow_decoder::VaeConfig vc = ctx.cfg.vae;
  vc.seed = seed_for(ctx, kSeedVae);
  flow_decoder::VaeTrainLog log;
  const auto vae = flow_decoder::vae_train(waves, vc, &log);
  const auto stats = flow_decoder::reconstruction_stats(vae, waves);
  Checkpoint ckpt;
  ckpt.header = base_header(ctx, "vae", vc.seed);
  ckpt.header["step"] = vc.steps;
  put_params(ckpt, vae.params());
  save_checkpoint(ckpt_path(ctx, "vae"), ckpt);
  write_json(log_path(ctx, "vae"), {{"losses", log.losses}, {"recon_mse", stats.mse}, {"variance", stats.variance}});
  spdlog::info("vae: relative reconstruction MSE {:.4f} ({:.1f} s)", stats.mse / stats.variance, timer.seconds());
}

void run_flow_train(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const auto vae = load_vae(ctx);
  const auto train = load_samples(data_dir(ctx) / "train.jsonl");
  const auto items = flow_items(train, vae);
  flow_decoder::TokenLatentTable table(synthdata::kCodecVocab, vae.latent_dim(), seed_for(ctx, kSeedTable));
  flow_decoder::VelocityField field(vae.latent_dim(), ctx.cfg.flow.net, seed_for(ctx, kSeedFlowNet));
  flow_decoder::FlowConfig fc = ctx.cfg.flow;
  fc.seed = seed_for(ctx, kSeedFlow);
  flow_decoder::FlowTrainLog log;
  flow_decoder::flow_train(field, table, items, fc, &log);
  Checkpoint ckpt;
  ckpt.header = base_header(ctx, "flow", fc.seed);
  ckpt.header["step"] = fc.steps;
  ckpt.header["table_seed"] = seed_for(ctx, kSeedTable);
  put_params(ckpt, field.params());
  save_checkpoint(ckpt_path(ctx, "flow"), ckpt);
  write_json(log_path(ctx, "flow"), {{"losses", log.losses}});
  spdlog::info("flow: loss {:.5f} -> {:.5f} ({:.1f} s)", log.losses.front(), log.losses.back(), timer.seconds());
}

void run_casp_train(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const auto pairs = load_casp_pairs(data_dir(ctx) / "casp_train.jsonl");
  metrics::CaspConfig cc = ctx.cfg.casp;
  cc.feature_dim = synthdata::kCaspFeatureDim;
  cc.seed = seed_for(ctx, kSeedCasp);
  metrics::CaspModel model(cc);
  const auto log = metrics::casp_train(model, pairs);
  Checkpoint ckpt;
  ckpt.header = base_header(ctx, "casp", cc.seed);
  ckpt.header["step"] = cc.steps;
  put_params(ckpt, model.params());
  save_checkpoint(ckpt_path(ctx, "casp"), ckpt);
  write_json(log_path(ctx, "casp"), {{"losses", log.losses}});
  spdlog::info("casp: loss {:.4f} -> {:.4f} ({:.1f} s)", log.losses.front(), log.losses.back(), timer.seconds());
}

void run_generate(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const auto lm = load_lm(ctx, 3);
  const auto vae = load_vae(ctx);
  const auto flow = load_flow(ctx, vae.latent_dim());
  const auto held = load_samples(data_dir(ctx) / "eval.jsonl");
  const fs::path root = ctx.out / "generated";
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& m = held[i];
    const auto in = curriculum::mask_for_task(m, TaskKind::v2st, lm.tokenizer);
    const auto g = greedy_v2st(*lm.model, m, in, derive_seed(seed_for(ctx, kSeedGenerate), i));
    const auto audio = decode_tokens(content(g.streams.audio_ids, synthdata::kAudioEos), flow, vae,
                                     ctx.cfg.generate.euler_steps);
    const auto speech = decode_tokens(content(g.streams.speech_ids, synthdata::kSpeechEos), flow, vae,
                                      ctx.cfg.generate.euler_steps);
    ManifestEntry e;
    e.id = m.id;
    e.tasks = {"v2st"};
    e.transcript = m.text;
    e.speaker = m.spec.speaker;
    e.duration_s = m.spec.duration_s;
    e.extra = {{"audio_eos_step", g.audio_eos_step}, {"speech_eos_step", g.speech_eos_step}};
    auto put = [&](const std::string& role, const Tensor& t) {
      const std::string rel = m.id + "/" + role + ".ddtf";
      save_tensor(root / rel, t);
      e.files[role] = rel;
    };
    put("audio_ids", ids_tensor(g.streams.audio_ids));
    put("speech_ids", ids_tensor(g.streams.speech_ids));
    put("audio_wave", wave_tensor(audio));
    put("speech_wave", wave_tensor(speech));
    flow_decoder::write_wav_pcm16((root / m.id / "audio.wav").string(), audio, synthdata::kSampleRate);
    flow_decoder::write_wav_pcm16((root / m.id / "speech.wav").string(), speech, synthdata::kSampleRate);
    e.files["audio_wav"] = m.id + "/audio.wav";
    e.files["speech_wav"] = m.id + "/speech.wav";
    entries.push_back(std::move(e));
  }
  save_manifest(root / "generated.jsonl", entries);
  spdlog::info("generate: {} scenes ({:.1f} s)", held.size(), timer.seconds());
}

json run_eval(const RunContext& ctx) {
  ctx.cfg.validate();
  Timer timer;
  const auto& th = ctx.cfg.thresholds;
  const double ln_v = std::log(static_cast<double>(synthdata::kCodecVocab));
  json report;
  report["profile"] = ctx.cfg.profile;
  report["seed"] = ctx.cfg.seed;
  report["config_hash"] = ctx.cfg.hash();

  // Curriculum: teacher-forced probes recorded at the end of each stage.
  json stages = json::object();
  for (int s = 1; s <= 3; ++s) {
    const json log = read_json(log_path(ctx, stage_name(s)));
    stages[stage_name(s)] = {{"train", log.at("probe_train")}, {"heldout", log.at("probe_heldout")}};
  }
  const double s1_v2a = stages["stage1"]["train"]["v2a"].get<double>();
  const double s2_tts = stages["stage2"]["train"]["tts"].get<double>();
  json retention = {
      {"v2a", stages["stage3"]["heldout"]["v2a"].get<double>() / stages["stage2"]["heldout"]["v2a"].get<double>()},
      {"tts", stages["stage3"]["heldout"]["tts"].get<double>() / stages["stage2"]["heldout"]["tts"].get<double>()}};
  report["curriculum"] = {{"ln_codec_vocab", ln_v},
                          {"stage1_v2a_train_ce", s1_v2a},
                          {"stage2_tts_train_ce", s2_tts},
                          {"probes", stages},
                          {"retention", retention}};

  // Greedy recall on the training scenes, and on held-out scenes from the
  // generate step.
  const auto lm = load_lm(ctx, 3);
  const auto train = load_samples(data_dir(ctx) / "train.jsonl");
  const auto held = load_samples(data_dir(ctx) / "eval.jsonl");
  std::vector<std::vector<int>> ga, gs;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto in = curriculum::mask_for_task(train[i], TaskKind::v2st, lm.tokenizer);
    const auto g = greedy_v2st(*lm.model, train[i], in, derive_seed(seed_for(ctx, kSeedGenerate), 1000 + i));
    ga.push_back(g.streams.audio_ids);
    gs.push_back(g.streams.speech_ids);
  }
  const Recall train_recall = token_recall(ga, gs, train);
  const fs::path gen_manifest = ctx.out / "generated" / "generated.jsonl";
  const auto gen_entries = load_manifest(gen_manifest);
  if (gen_entries.size() != held.size()) throw ValidationError("generated set does not match the eval manifest");
  ga.clear();
  gs.clear();
  std::vector<std::vector<float>> gen_audio, gen_speech;
  for (const auto& e : gen_entries) {
    ga.push_back(tensor_ids(load_tensor(resolve(gen_manifest, e, "audio_ids"))));
    gs.push_back(tensor_ids(load_tensor(resolve(gen_manifest, e, "speech_ids"))));
    gen_audio.push_back(tensor_wave(load_tensor(resolve(gen_manifest, e, "audio_wave"))));
    gen_speech.push_back(tensor_wave(load_tensor(resolve(gen_manifest, e, "speech_wave"))));
  }
  const Recall held_recall = token_recall(ga, gs, held);
  report["recall"] = {{"train", {{"audio", train_recall.audio}, {"speech", train_recall.speech}}},
                      {"heldout", {{"audio", held_recall.audio}, {"speech", held_recall.speech}}}};

  // Flow decoder on the training latents.
  const auto vae = load_vae(ctx);
  const auto flow = load_flow(ctx, vae.latent_dim());
  const auto items = flow_items(train, vae);
  std::vector<std::vector<float>> train_waves;
  for (const auto& m : train) {
    train_waves.push_back(m.audio_wave);
    train_waves.push_back(m.speech_wave);
  }
  const auto recon = flow_decoder::reconstruction_stats(vae, train_waves);
  const double recovery = flow_decoder::latent_recovery_error(flow.field, flow.table, items, ctx.cfg.generate.euler_steps);
  report["flow"] = {{"euler_steps", ctx.cfg.generate.euler_steps},
                    {"recovery_error", recovery},
                    {"vae_relative_mse", recon.mse / recon.variance}};

  // Generated versus reference soundtracks of the held-out scenes.
  const auto casp = load_casp(ctx);
  std::vector<double> align_gen, align_ref, score_gen, score_ref;
  metrics::Rows panns_gen, panns_ref, vgg_gen, vgg_ref, post_gen, post_ref;
  int kept_gen = 0, kept_ref = 0;
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto& m = held[i];
    const auto vp = video_peaks(m.video);
    align_gen.push_back(metrics::av_align(audio_peaks(gen_audio[i]), vp));
    align_ref.push_back(metrics::av_align(audio_peaks(m.audio_wave), vp));
    score_gen.push_back(metrics::dual_score(*casp, synthdata::casp_features(gen_audio[i]),
                                            synthdata::casp_features(gen_speech[i])));
    score_ref.push_back(metrics::dual_score(*casp, synthdata::casp_features(m.audio_wave),
                                            synthdata::casp_features(m.speech_wave)));
    panns_gen.push_back(synthdata::standin_embedder(gen_audio[i], synthdata::EmbedRole::panns_like));
    panns_ref.push_back(synthdata::standin_embedder(m.audio_wave, synthdata::EmbedRole::panns_like));
    vgg_gen.push_back(synthdata::standin_embedder(gen_audio[i], synthdata::EmbedRole::vggish_like));
    vgg_ref.push_back(synthdata::standin_embedder(m.audio_wave, synthdata::EmbedRole::vggish_like));
    post_gen.push_back(synthdata::standin_embedder(gen_audio[i], synthdata::EmbedRole::classifier_like));
    post_ref.push_back(synthdata::standin_embedder(m.audio_wave, synthdata::EmbedRole::classifier_like));
    kept_gen += metrics::filter_pair(gen_audio[i], gen_speech[i]);
    kept_ref += metrics::filter_pair(m.audio_wave, m.speech_wave);
  }
  report["av_align"] = {{"generated", mean(align_gen)}, {"reference", mean(align_ref)}};
  report["dual_score"] = {{"generated", mean(score_gen)}, {"reference", mean(score_ref)}};
  report["distribution"] = {
      {"fd", metrics::frechet(metrics::gaussian_stats(panns_gen), metrics::gaussian_stats(panns_ref))},
      {"fad", metrics::frechet(metrics::gaussian_stats(vgg_gen), metrics::gaussian_stats(vgg_ref))},
      {"kl", metrics::kl_metric(post_gen, post_ref)},
      {"is_generated", metrics::inception_score(post_gen)},
      {"is_reference", metrics::inception_score(post_ref)}};
  report["energy_filter"] = {{"threshold_db", -40.0},
                             {"kept_generated", kept_gen},
                             {"kept_reference", kept_ref},
                             {"total", static_cast<int>(held.size())}};

  // CASP retrieval on the held-out pairs.
  const auto casp_pairs = load_casp_pairs(data_dir(ctx) / "casp_eval.jsonl");
  const auto r = metrics::topk_retrieval(*casp, casp_pairs, {1, 3, 5});
  report["retrieval"] = {{"pairs", static_cast<int>(casp_pairs.size())},
                         {"top1", r.accuracy[0]},
                         {"top3", r.accuracy[1]},
                         {"top5", r.accuracy[2]},
                         {"mean_matched", r.mean_matched},
                         {"mean_mismatched", r.mean_mismatched}};
  report["paper_reference"] = {{"casp_top1", 0.70},
                               {"casp_top3", 0.90},
                               {"casp_top5", 0.95},
                               {"pairs", 1319},
                               {"reproducible_at_desk_scale", false}};

  report["pass"] = {
      {"stage1_v2a_ce", s1_v2a <= 0.5 * ln_v},
      {"stage2_tts_ce", s2_tts <= 0.5 * ln_v},
      {"retention", retention["v2a"].get<double>() <= 1.25 && retention["tts"].get<double>() <= 1.25},
      {"train_recall", train_recall.audio >= th.train_recall && train_recall.speech >= th.train_recall},
      {"flow_recovery", recovery < th.flow_recovery},
      {"casp_top1", r.accuracy[0] >= th.casp_top1},
      {"casp_top3", r.accuracy[1] >= th.casp_top3}};

  write_text(ctx.out / "report.json", report_text(report));
  spdlog::info("eval: report written to {} ({:.1f} s)", (ctx.out / "report.json").string(), timer.seconds());
  return report;
}

json run_pipeline(const RunContext& ctx) {
  run_synth(ctx);
  for (int s = 1; s <= 3; ++s) run_train_stage(ctx, s);
  run_vae_train(ctx);
  run_flow_train(ctx);
  run_casp_train(ctx);
  run_generate(ctx);
  return run_eval(ctx);
}

}  // namespace v2st::inline V2ST_REAL_NS::harness
