#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "v2st/numerics/layers.hpp"

namespace v2st::inline V2ST_REAL_NS::flow_decoder {

inline constexpr int kFrameSamples = 64;

struct LatentSeq {
  Tensor z;  // [L_lat, d_lat]
  double rate_hz = 40.0;
  int frames() const { return z.empty() ? 0 : z.rows(); }
};

// Splits a waveform into [frames, 64] rows, zero-padding the tail.
Tensor frame_waveform(std::span<const float> wave);
std::vector<float> unframe(const Tensor& frames);

struct VaeConfig {
  int hidden = 128;
  int latent = 16;
  double beta = 1e-3;
  int steps = 1500;
  int batch_frames = 128;
  double lr = 2e-3;
  std::uint64_t seed = 3;
};

struct VaeEncoding {
  Var mean;    // [F, d_lat]
  Var logvar;  // [F, d_lat]
};

class ToyVae {
 public:
  ToyVae() = default;
  explicit ToyVae(const VaeConfig& cfg);
  ToyVae(const ToyVae&) = delete;
  ToyVae& operator=(const ToyVae&) = delete;
  ToyVae(ToyVae&&) = default;
  ToyVae& operator=(ToyVae&&) = default;

  VaeEncoding encode(const Var& frames) const;
  Var decode(const Var& z) const;
  // Reconstruction MSE + beta * mean KL to N(0, I); `eps` holds the
  // reparameterization noise, shape of the latent.
  Var loss(const Tensor& frames, const Tensor& eps, double beta) const;

  int latent_dim() const { return cfg_.latent; }
  const VaeConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Frozen VAEs run without recording gradients.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  LatentSeq encode_mean(std::span<const float> wave) const;

 private:
  VaeConfig cfg_;
  ParamStore store_;
  layers::Linear enc1_, enc_mean_, enc_logvar_, dec1_, dec2_;
  bool frozen_ = false;
};

struct VaeTrainLog {
  std::vector<double> losses;
};

// Trains on frames pooled from every waveform, then freezes the VAE. Throws
// ValidationError for fewer than 64 waveforms and NumericError on a
// non-finite loss.
ToyVae vae_train(const std::vector<std::vector<float>>& waveforms, const VaeConfig& cfg, VaeTrainLog* log = nullptr);

// Mean reconstruction MSE of decode(encode-mean(w)) and the variance of the
// waveform samples, both over all frames.
struct ReconstructionStats {
  double mse = 0;
  double variance = 0;
};
ReconstructionStats reconstruction_stats(const ToyVae& vae, const std::vector<std::vector<float>>& waveforms);

// Fixed token embedding that starts every trajectory.
class TokenLatentTable {
 public:
  TokenLatentTable() = default;
  TokenLatentTable(int vocab, int d_lat, std::uint64_t seed);
  const Tensor& table() const { return table_; }
  int latent_dim() const { return table_.cols(); }

 private:
  Tensor table_;
};

// Embeds the ids, then nearest-neighbour resamples T rows to `frames` rows.
LatentSeq tokens_to_z0(const TokenLatentTable& table, std::span<const int> ids, int frames, double rate_hz = 40.0);

// (1 - t) z0 + t z1. Throws ValidationError for t outside [0, 1] and
// ShapeError for mismatched shapes.
Tensor interpolate(const Tensor& z0, const Tensor& z1, double t);

// dZ/dt as a function of the state and time.
using VelocityFn = std::function<Var(const Var& z, double t)>;

struct VelocityConfig {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int mlp_dim = 128;
  int time_dim = 32;
};

// Small non-causal transformer over latent frames with a sinusoidal time
// embedding added to every frame.
class VelocityField {
 public:
  VelocityField() = default;
  VelocityField(int d_lat, const VelocityConfig& cfg, std::uint64_t seed);
  VelocityField(const VelocityField&) = delete;
  VelocityField& operator=(const VelocityField&) = delete;
  VelocityField(VelocityField&&) = default;
  VelocityField& operator=(VelocityField&&) = default;

  Var operator()(const Var& z, double t) const;
  VelocityFn fn() const {
    return [this](const Var& z, double t) { return (*this)(z, t); };
  }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

 private:
  VelocityConfig cfg_;
  ParamStore store_;
  layers::Linear in_, time_, out_;
  std::vector<layers::TransformerBlock> blocks_;
  layers::RmsNorm norm_;
};

// Mean over the batch of the per-element squared error between v(Z_t, t)
// and Z1 - Z0. `ts` gives one time per pair.
Var fm_loss(const VelocityFn& v, const std::vector<Tensor>& z0, const std::vector<Tensor>& z1, std::span<const double> ts);

// Explicit Euler from t = 0 to 1. Throws ValidationError for n_steps < 1 and
// NumericError naming the step when the state becomes non-finite.
Tensor integrate(const VelocityFn& v, const Tensor& z0, int n_steps = 32);

// Frozen-decoder waveform for a latent sequence. Throws ShapeError when the
// latent width differs from the VAE's.
std::vector<float> decode_waveform(const Tensor& z, const ToyVae& vae);

struct FlowItem {
  std::vector<int> tokens;  // one per latent frame
  Tensor z1;                // VAE mean latents
};

struct FlowConfig {
  VelocityConfig net;
  int steps = 2000;
  int batch = 8;
  double lr = 2e-3;
  std::uint64_t seed = 9;
};

struct FlowTrainLog {
  std::vector<double> losses;
};

// Trains the field on (tokens_to_z0, z1) pairs with uniform t per item.
void flow_train(VelocityField& field, const TokenLatentTable& table, const std::vector<FlowItem>& items,
                const FlowConfig& cfg, FlowTrainLog* log = nullptr);

// Mean over items of |integrate(z0) - z1|^2 / |z1|^2.
double latent_recovery_error(const VelocityField& field, const TokenLatentTable& table,
                             const std::vector<FlowItem>& items, int n_steps = 32);

// Canonical 44-byte-header PCM16 mono WAV; samples are clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);
void write_wav_pcm16(const std::string& path, std::span<const float> samples, int sample_rate);

}  // namespace v2st::inline V2ST_REAL_NS::flow_decoder
