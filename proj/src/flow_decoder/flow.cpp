#include "v2st/flow_decoder/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "v2st/frontend/video.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/optim.hpp"
#include "v2st/numerics/schedule.hpp"

namespace v2st::inline V2ST_REAL_NS::flow_decoder {

Tensor frame_waveform(std::span<const float> wave) {
  if (wave.empty()) throw ValidationError("frame_waveform: empty waveform");
  const int frames = static_cast<int>((wave.size() + kFrameSamples - 1) / kFrameSamples);
  Tensor out = Tensor::matrix(frames, kFrameSamples);
  std::copy(wave.begin(), wave.end(), out.storage().begin());
  return out;
}

std::vector<float> unframe(const Tensor& frames) {
  return std::vector<float>(frames.storage().begin(), frames.storage().end());
}

ToyVae::ToyVae(const VaeConfig& cfg) : cfg_(cfg) {
  if (cfg.latent < 1 || cfg.hidden < 1) throw ValidationError("ToyVae: latent and hidden sizes must be positive");
  Rng rng(cfg.seed);
  enc1_ = layers::Linear(store_, "vae.enc1", kFrameSamples, cfg.hidden, rng);
  enc_mean_ = layers::Linear(store_, "vae.enc_mean", cfg.hidden, cfg.latent, rng);
  enc_logvar_ = layers::Linear(store_, "vae.enc_logvar", cfg.hidden, cfg.latent, rng, true, 0.1);
  dec1_ = layers::Linear(store_, "vae.dec1", cfg.latent, cfg.hidden, rng);
  dec2_ = layers::Linear(store_, "vae.dec2", cfg.hidden, kFrameSamples, rng);
}

VaeEncoding ToyVae::encode(const Var& frames) const {
  if (frames.cols() != kFrameSamples) throw ShapeError("vae encode: frames must have 64 columns");
  const Var h = ops::tanh(enc1_(frames));
  return {enc_mean_(h), enc_logvar_(h)};
}

Var ToyVae::decode(const Var& z) const {
  if (z.cols() != cfg_.latent) {
    throw ShapeError("vae decode: latent width " + std::to_string(z.cols()) + ", expected " + std::to_string(cfg_.latent));
  }
  return dec2_(ops::tanh(dec1_(z)));
}

Var ToyVae::loss(const Tensor& frames, const Tensor& eps, double beta) const {
  const Var x = Var::constant(frames);
  const auto enc = encode(x);
  const Var std = ops::exp(ops::scale(enc.logvar, Real(0.5)));
  const Var z = ops::add(enc.mean, ops::mul(std, Var::constant(eps)));
  const Var recon = ops::mse(decode(z), x);
  if (beta == 0) return recon;
  // KL(N(m, s^2) || N(0, 1)) = 0.5 (s^2 + m^2 - 1 - log s^2), averaged.
  const Var kl = ops::scale(
      ops::mean(ops::sub(ops::add(ops::exp(enc.logvar), ops::square(enc.mean)), ops::add_scalar(enc.logvar, Real(1)))),
      Real(0.5));
  return ops::add(recon, ops::scale(kl, static_cast<Real>(beta)));
}

LatentSeq ToyVae::encode_mean(std::span<const float> wave) const {
  NoGradGuard guard;
  return {encode(Var::constant(frame_waveform(wave))).mean.value(), 40.0};
}

ToyVae vae_train(const std::vector<std::vector<float>>& waveforms, const VaeConfig& cfg, VaeTrainLog* log) {
  if (waveforms.size() < 64) {
    throw ValidationError("vae_train: need at least 64 waveforms, got " + std::to_string(waveforms.size()));
  }
  std::vector<Real> pool;
  for (const auto& w : waveforms) {
    const Tensor f = frame_waveform(w);
    pool.insert(pool.end(), f.storage().begin(), f.storage().end());
  }
  const int total = static_cast<int>(pool.size() / kFrameSamples);
  ToyVae vae(cfg);
  AdamState opt(vae.params());
  Rng rng(derive_seed(cfg.seed, 0x7AE));
  const int batch = std::min(cfg.batch_frames, total);
  const int warmup = std::max(1, cfg.steps / 20);
  for (int step = 0; step < cfg.steps; ++step) {
    Tensor frames = Tensor::matrix(batch, kFrameSamples);
    for (int b = 0; b < batch; ++b) {
      const auto src = pool.begin() + static_cast<std::ptrdiff_t>(rng.index(total)) * kFrameSamples;
      std::copy(src, src + kFrameSamples, frames.storage().begin() + static_cast<std::ptrdiff_t>(b) * kFrameSamples);
    }
    Tensor eps = Tensor::matrix(batch, cfg.latent);
    if (cfg.beta > 0)
      for (auto& e : eps.storage()) e = static_cast<Real>(rng.normal());
    vae.params().zero_grad();
    const Var loss = vae.loss(frames, eps, cfg.beta);
    if (!std::isfinite(loss.item())) throw NumericError("vae_train: non-finite loss at step " + std::to_string(step));
    loss.backward();
    adam_step(vae.params(), opt, cosine_lr(step + 1, warmup, cfg.lr * 0.05, cfg.lr, cfg.steps));
    if (log) log->losses.push_back(loss.item());
  }
  vae.freeze();
  return vae;
}

ReconstructionStats reconstruction_stats(const ToyVae& vae, const std::vector<std::vector<float>>& waveforms) {
  NoGradGuard guard;
  double se = 0, sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& w : waveforms) {
    const Tensor frames = frame_waveform(w);
    const Tensor recon = vae.decode(vae.encode(Var::constant(frames)).mean).value();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const double x = frames[i];
      se += (recon[i] - x) * (recon[i] - x);
      sum += x;
      sq += x * x;
    }
    n += frames.size();
  }
  const double mean = sum / static_cast<double>(n);
  return {se / static_cast<double>(n), sq / static_cast<double>(n) - mean * mean};
}

TokenLatentTable::TokenLatentTable(int vocab, int d_lat, std::uint64_t seed) {
  Rng rng(seed);
  table_ = normal_tensor({vocab, d_lat}, 1.0, rng);
}

LatentSeq tokens_to_z0(const TokenLatentTable& table, std::span<const int> ids, int frames, double rate_hz) {
  if (ids.empty() || frames < 1) throw ValidationError("tokens_to_z0: need tokens and a positive frame count");
  const Tensor& t = table.table();
  const auto src = frontend::nearest_indices(static_cast<int>(ids.size()), frames);
  Tensor z = Tensor::matrix(frames, t.cols());
  for (int r = 0; r < frames; ++r) {
    const int id = ids[static_cast<std::size_t>(src[static_cast<std::size_t>(r)])];
    if (id < 0 || id >= t.rows()) throw IndexError("tokens_to_z0: token id " + std::to_string(id) + " outside table");
    const auto row = t.row_span(id);
    std::copy(row.begin(), row.end(), z.row_span(r).begin());
  }
  return {std::move(z), rate_hz};
}

Tensor interpolate(const Tensor& z0, const Tensor& z1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("interpolate: t = " + std::to_string(t) + " outside [0, 1]");
  if (z0.shape() != z1.shape()) throw ShapeError("interpolate: shapes differ");
  Tensor out = Tensor::matrix(z0.rows(), z0.cols());
  const Real a = static_cast<Real>(1.0 - t), b = static_cast<Real>(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * z1[i];
  return out;
}

VelocityField::VelocityField(int d_lat, const VelocityConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  in_ = layers::Linear(store_, "flow.in", d_lat, cfg.dim, rng);
  time_ = layers::Linear(store_, "flow.time", cfg.time_dim, cfg.dim, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    blocks_.emplace_back(store_, "flow.block" + std::to_string(l), cfg.dim, cfg.heads, cfg.mlp_dim, rng);
  }
  norm_ = layers::RmsNorm(store_, "flow.norm", cfg.dim);
  out_ = layers::Linear(store_, "flow.out", cfg.dim, d_lat, rng, true, 0.1);
}

Var VelocityField::operator()(const Var& z, double t) const {
  const Var temb = time_(Var::constant(layers::sinusoidal({1000.0 * t}, cfg_.time_dim)));
  Var h = ops::add_row(in_(z), temb);
  const auto mask = AttentionMask::non_causal(z.rows(), z.rows());
  for (const auto& block : blocks_) h = block(h, mask);
  return out_(norm_(h));
}

Var fm_loss(const VelocityFn& v, const std::vector<Tensor>& z0, const std::vector<Tensor>& z1, std::span<const double> ts) {
  if (z0.empty() || z0.size() != z1.size() || ts.size() != z0.size()) {
    throw ValidationError("fm_loss: need matching non-empty z0, z1 and t lists");
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    const Tensor zt = interpolate(z0[i], z1[i], ts[i]);
    Tensor target = Tensor::matrix(z1[i].rows(), z1[i].cols());
    for (std::size_t k = 0; k < target.size(); ++k) target[k] = z1[i][k] - z0[i][k];
    terms.push_back(ops::mse(v(Var::constant(zt), ts[i]), Var::constant(target)));
  }
  Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(total, terms[i]);
  return ops::scale(total, static_cast<Real>(1.0 / static_cast<double>(terms.size())));
}

Tensor integrate(const VelocityFn& v, const Tensor& z0, int n_steps) {
  if (n_steps < 1) throw ValidationError("integrate: n_steps must be >= 1");
  NoGradGuard guard;
  Tensor z = z0;
  const double h = 1.0 / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const Tensor dz = v(Var::constant(z), static_cast<double>(k) / n_steps).value();
    if (dz.shape() != z.shape()) throw ShapeError("integrate: velocity shape differs from the state");
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] += static_cast<Real>(h * dz[i]);
      if (!std::isfinite(z[i])) throw NumericError("integrate: non-finite state at step " + std::to_string(k));
    }
  }
  return z;
}

std::vector<float> decode_waveform(const Tensor& z, const ToyVae& vae) {
  if (z.cols() != vae.latent_dim()) {
    throw ShapeError("decode_waveform: latent width " + std::to_string(z.cols()) + ", VAE expects " +
                     std::to_string(vae.latent_dim()));
  }
  NoGradGuard guard;
  return unframe(vae.decode(Var::constant(z)).value());
}

void flow_train(VelocityField& field, const TokenLatentTable& table, const std::vector<FlowItem>& items,
                const FlowConfig& cfg, FlowTrainLog* log) {
  if (items.empty()) throw ValidationError("flow_train: no items");
  std::vector<Tensor> z0s, z1s;
  for (const auto& it : items) {
    z0s.push_back(tokens_to_z0(table, it.tokens, it.z1.rows()).z);
    z1s.push_back(it.z1);
  }
  AdamState opt(field.params());
  Rng rng(derive_seed(cfg.seed, 0xF70));
  const int batch = std::min<int>(cfg.batch, static_cast<int>(items.size()));
  const int warmup = std::max(1, cfg.steps / 20);
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> b0, b1;
    std::vector<double> ts;
    for (int b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      const auto i = static_cast<std::size_t>(order[cursor++]);
      b0.push_back(z0s[i]);
      b1.push_back(z1s[i]);
      ts.push_back(rng.uniform());
    }
    field.params().zero_grad();
    const Var loss = fm_loss(field.fn(), b0, b1, ts);
    if (!std::isfinite(loss.item())) throw NumericError("flow_train: non-finite loss at step " + std::to_string(step));
    loss.backward();
    clip_grad_norm(field.params(), 1.0);
    adam_step(field.params(), opt, cosine_lr(step + 1, warmup, cfg.lr * 0.05, cfg.lr, cfg.steps));
    if (log) log->losses.push_back(loss.item());
    if ((step + 1) % 200 == 0) spdlog::debug("flow step {} loss {:.5f}", step + 1, loss.item());
  }
}

double latent_recovery_error(const VelocityField& field, const TokenLatentTable& table,
                             const std::vector<FlowItem>& items, int n_steps) {
  if (items.empty()) throw ValidationError("latent_recovery_error: no items");
  double total = 0;
  for (const auto& it : items) {
    const Tensor z0 = tokens_to_z0(table, it.tokens, it.z1.rows()).z;
    const Tensor z = integrate(field.fn(), z0, n_steps);
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      err += (z[i] - it.z1[i]) * (z[i] - it.z1[i]);
      ref += static_cast<double>(it.z1[i]) * it.z1[i];
    }
    total += ref > 0 ? err / ref : err;
  }
  return total / static_cast<double>(items.size());
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  if (sample_rate <= 0) throw ValidationError("wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0f))));
  }
  return out;
}

void write_wav_pcm16(const std::string& path, std::span<const float> samples, int sample_rate) {
  const auto bytes = encode_wav_pcm16(samples, sample_rate);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace v2st::inline V2ST_REAL_NS::flow_decoder
