#include "v2st/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "v2st/harness/io.hpp"

namespace v2st::inline V2ST_REAL_NS::harness {

using nlohmann::json;

namespace {

// Reads optional keys of one object and rejects the ones nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: " + path_ + " must be an object");
  }
  void done() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("config: unknown key " + path_ + "." + item.key());
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: " + path_ + "." + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  std::string at(const char* key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json stage_json(const curriculum::StageConfig& s) {
  json mixing = json::object();
  for (const auto& [task, w] : s.mixing) mixing[std::string(curriculum::task_name(task))] = w;
  return {{"steps", s.steps},       {"warmup_steps", s.warmup_steps}, {"batch_size", s.batch_size},
          {"grad_clip", s.grad_clip}, {"lr_min", s.lr_min},             {"lr_max", s.lr_max},
          {"mixing", mixing}};
}

// `epochs`, when given, sets the step count from the training-set size.
void read_stage(const json& j, const std::string& path, int train_size, curriculum::StageConfig& s) {
  Fields f(j, path);
  f.get("steps", s.steps);
  double epochs = 0;
  f.get("epochs", epochs);
  f.get("warmup_steps", s.warmup_steps);
  f.get("batch_size", s.batch_size);
  f.get("grad_clip", s.grad_clip);
  f.get("lr_min", s.lr_min);
  f.get("lr_max", s.lr_max);
  if (epochs > 0) {
    const int per_epoch = (train_size + s.batch_size - 1) / std::max(1, s.batch_size);
    s.steps = static_cast<int>(std::ceil(epochs * per_epoch));
  }
  const json* m = f.sub("mixing");
  f.done();
  if (m) {
    if (!m->is_object()) throw ValidationError("config: " + f.at("mixing") + " must be an object");
    s.mixing.clear();
    for (const auto& item : m->items()) {
      if (!item.value().is_number()) throw ValidationError("config: " + f.at("mixing") + "." + item.key() + " must be a number");
      s.mixing[curriculum::parse_task(item.key())] = item.value().get<double>();
    }
  }
}

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.model = curriculum::desk_model_config(c.data.tokenizer_vocab);
  for (int s = 1; s <= 3; ++s) c.stages[static_cast<std::size_t>(s - 1)] = curriculum::StageConfig::defaults(s, c.desk_factor);
  c.stages[0].steps = 600;
  c.stages[1].steps = 1000;
  c.stages[2].steps = 300;
  for (auto& s : c.stages) s.warmup_steps = s.steps / 10;
  // Stage 3 peaks at the same rate as stages 1 and 2; at the full-scale tenfold
  // lower rate the V2ST pairs are not memorized within the step budget.
  const auto r3 = curriculum::paper_lr_range(3);
  c.stages[2].lr_min = r3.min * 100;
  c.stages[2].lr_max = r3.max * 100;
  c.flow.steps = 1000;
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["profile"] = profile;
  j["seed"] = seed;
  j["data"] = {{"train", data.train},
               {"eval", data.eval},
               {"casp_train", data.casp_train},
               {"casp_eval", data.casp_eval},
               {"tokenizer_vocab", data.tokenizer_vocab}};
  j["model"] = {{"dim", model.dim},         {"layers", model.layers},   {"heads", model.heads},
                {"mlp_dim", model.mlp_dim}, {"max_len", model.max_len}, {"speaker_dim", model.speaker_dim}};
  json stages = json::array();
  for (const auto& s : this->stages) stages.push_back(stage_json(s));
  j["curriculum"] = {{"desk_factor", desk_factor}, {"stages", stages}};
  j["vae"] = {{"hidden", vae.hidden}, {"latent", vae.latent},           {"beta", vae.beta},
              {"steps", vae.steps},   {"batch_frames", vae.batch_frames}, {"lr", vae.lr}};
  j["flow"] = {{"dim", flow.net.dim},
               {"layers", flow.net.layers},
               {"heads", flow.net.heads},
               {"mlp_dim", flow.net.mlp_dim},
               {"time_dim", flow.net.time_dim},
               {"steps", flow.steps},
               {"batch", flow.batch},
               {"lr", flow.lr}};
  j["casp"] = {{"dim", casp.dim},         {"layers", casp.layers},       {"heads", casp.heads},
               {"pool_heads", casp.pool_heads}, {"mlp_dim", casp.mlp_dim}, {"embed_dim", casp.embed_dim},
               {"crop_frames", casp.crop_frames}, {"steps", casp.steps},   {"batch", casp.batch},
               {"lr", casp.lr}};
  j["generate"] = {{"euler_steps", generate.euler_steps}};
  j["thresholds"] = {{"casp_top1", thresholds.casp_top1},
                     {"casp_top3", thresholds.casp_top3},
                     {"flow_recovery", thresholds.flow_recovery},
                     {"train_recall", thresholds.train_recall}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c = desk();
  Fields top(j, "config");
  top.get("profile", c.profile);
  top.get("seed", c.seed);
  if (const json* d = top.sub("data")) {
    Fields f(*d, "data");
    f.get("train", c.data.train);
    f.get("eval", c.data.eval);
    f.get("casp_train", c.data.casp_train);
    f.get("casp_eval", c.data.casp_eval);
    f.get("tokenizer_vocab", c.data.tokenizer_vocab);
    c.model.text_vocab = c.data.tokenizer_vocab;
    f.done();
  }
  if (const json* m = top.sub("model")) {
    Fields f(*m, "model");
    f.get("dim", c.model.dim);
    f.get("layers", c.model.layers);
    f.get("heads", c.model.heads);
    f.get("mlp_dim", c.model.mlp_dim);
    f.get("max_len", c.model.max_len);
    f.get("speaker_dim", c.model.speaker_dim);
    f.done();
  }
  if (const json* cur = top.sub("curriculum")) {
    Fields f(*cur, "curriculum");
    double factor = c.desk_factor;
    f.get("desk_factor", factor);
    if (!(factor > 0)) throw ValidationError("config: curriculum.desk_factor must be positive");
    for (int s = 1; s <= 3; ++s) {
      auto& st = c.stages[static_cast<std::size_t>(s - 1)];
      const auto range = curriculum::paper_lr_range(s);
      st.lr_min = range.min * factor;
      st.lr_max = range.max * factor;
    }
    c.desk_factor = factor;
    if (const json* stages = f.sub("stages")) {
      if (!stages->is_array() || stages->size() != 3) {
        throw ValidationError("config: curriculum.stages must list exactly 3 stages");
      }
      for (std::size_t i = 0; i < 3; ++i) {
        read_stage((*stages)[i], "curriculum.stages[" + std::to_string(i) + "]", c.data.train, c.stages[i]);
      }
    }
    f.done();
  }
  if (const json* v = top.sub("vae")) {
    Fields f(*v, "vae");
    f.get("hidden", c.vae.hidden);
    f.get("latent", c.vae.latent);
    f.get("beta", c.vae.beta);
    f.get("steps", c.vae.steps);
    f.get("batch_frames", c.vae.batch_frames);
    f.get("lr", c.vae.lr);
    f.done();
  }
  if (const json* fl = top.sub("flow")) {
    Fields f(*fl, "flow");
    f.get("dim", c.flow.net.dim);
    f.get("layers", c.flow.net.layers);
    f.get("heads", c.flow.net.heads);
    f.get("mlp_dim", c.flow.net.mlp_dim);
    f.get("time_dim", c.flow.net.time_dim);
    f.get("steps", c.flow.steps);
    f.get("batch", c.flow.batch);
    f.get("lr", c.flow.lr);
    f.done();
  }
  if (const json* cs = top.sub("casp")) {
    Fields f(*cs, "casp");
    f.get("dim", c.casp.dim);
    f.get("layers", c.casp.layers);
    f.get("heads", c.casp.heads);
    f.get("pool_heads", c.casp.pool_heads);
    f.get("mlp_dim", c.casp.mlp_dim);
    f.get("embed_dim", c.casp.embed_dim);
    f.get("crop_frames", c.casp.crop_frames);
    f.get("steps", c.casp.steps);
    f.get("batch", c.casp.batch);
    f.get("lr", c.casp.lr);
    f.done();
  }
  if (const json* g = top.sub("generate")) {
    Fields f(*g, "generate");
    f.get("euler_steps", c.generate.euler_steps);
    f.done();
  }
  if (const json* t = top.sub("thresholds")) {
    Fields f(*t, "thresholds");
    f.get("casp_top1", c.thresholds.casp_top1);
    f.get("casp_top3", c.thresholds.casp_top3);
    f.get("flow_recovery", c.thresholds.flow_recovery);
    f.get("train_recall", c.thresholds.train_recall);
    f.done();
  }
  top.done();
  return c;
}

std::string RunConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

void RunConfig::validate() const {
  if (data.train < 1 || data.eval < 1) throw ValidationError("config: data.train and data.eval must be positive");
  if (data.casp_train < 2) throw ValidationError("config: data.casp_train must be at least 2");
  if (data.casp_eval < 5) throw ValidationError("config: data.casp_eval must be at least 5 for top-5 retrieval");
  if (2 * data.train < 64) throw ValidationError("config: the VAE needs data.train >= 32 (two tracks per sample)");
  if (data.tokenizer_vocab <= 256) throw ValidationError("config: data.tokenizer_vocab must exceed 256");
  if (model.dim % model.heads != 0) throw ValidationError("config: model.dim must be divisible by model.heads");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto s = stages[i];
    s.stage = static_cast<int>(i) + 1;
    s.validate();
  }
  if (generate.euler_steps < 1) throw ValidationError("config: generate.euler_steps must be positive");
  if (vae.steps < 1 || flow.steps < 1 || casp.steps < 1) throw ValidationError("config: step counts must be positive");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

}  // namespace v2st::inline V2ST_REAL_NS::harness
