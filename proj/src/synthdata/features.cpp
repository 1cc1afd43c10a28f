#include "v2st/synthdata/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/params.hpp"
#include "v2st/synthdata/scene.hpp"

namespace v2st::inline V2ST_REAL_NS::synthdata {

namespace {

constexpr int kBins = kFrameSamples / 2 + 1;

struct Twiddles {
  std::array<std::array<double, kFrameSamples>, kBins> cos{}, sin{};
  Twiddles() {
    for (int k = 0; k < kBins; ++k) {
      for (int n = 0; n < kFrameSamples; ++n) {
        const double a = 2.0 * std::numbers::pi * k * n / kFrameSamples;
        cos[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = std::cos(a);
        sin[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = std::sin(a);
      }
    }
  }
};

const Twiddles& twiddles() {
  static const Twiddles t;
  return t;
}

int frame_count(std::span<const float> wave) {
  if (wave.empty()) throw ValidationError("features: empty waveform");
  return static_cast<int>((wave.size() + kFrameSamples - 1) / kFrameSamples);
}

struct Projection {
  std::vector<double> w;  // [in, out]
  int in = 0, out = 0;
};

Projection make_projection(std::uint64_t seed, int in, int out) {
  Rng rng(seed);
  Projection p{std::vector<double>(static_cast<std::size_t>(in * out)), in, out};
  for (auto& x : p.w) x = rng.normal() / std::sqrt(static_cast<double>(in));
  return p;
}

}  // namespace

Tensor frame_spectrum(std::span<const float> wave) {
  const int frames = frame_count(wave);
  const auto& tw = twiddles();
  Tensor out = Tensor::matrix(frames, kBins);
  for (int f = 0; f < frames; ++f) {
    std::array<double, kFrameSamples> x{};
    for (int n = 0; n < kFrameSamples; ++n) {
      const std::size_t i = static_cast<std::size_t>(f * kFrameSamples + n);
      x[static_cast<std::size_t>(n)] = i < wave.size() ? wave[i] : 0.0;
    }
    for (int k = 0; k < kBins; ++k) {
      double re = 0, im = 0;
      for (int n = 0; n < kFrameSamples; ++n) {
        re += x[static_cast<std::size_t>(n)] * tw.cos[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
        im -= x[static_cast<std::size_t>(n)] * tw.sin[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
      }
      out.at(f, k) = static_cast<Real>(std::sqrt(re * re + im * im));
    }
  }
  return out;
}

Tensor mel_frames(std::span<const float> wave) {
  const Tensor spec = frame_spectrum(wave);
  Tensor out = Tensor::matrix(spec.rows(), kMelDim);
  for (int f = 0; f < spec.rows(); ++f)
    for (int k = 0; k < kMelDim; ++k) out.at(f, k) = static_cast<Real>(std::log1p(spec.at(f, k + 1)));
  return out;
}

Tensor casp_features(std::span<const float> wave) {
  const Tensor spec = frame_spectrum(wave);
  const int frames = spec.rows();
  Tensor fine = Tensor::matrix(frames, kCaspBandDim);
  for (int f = 0; f < frames; ++f) {
    for (int band = 0; band < 8; ++band) {
      double e = 0;
      for (int k = 1 + 4 * band; k < 5 + 4 * band; ++k) e += static_cast<double>(spec.at(f, k)) * spec.at(f, k);
      fine.at(f, band) = static_cast<Real>(std::log10(e / (kFrameSamples * kFrameSamples) + 1e-4));
    }
    double ss = 0;
    for (int n = 0; n < kFrameSamples; ++n) {
      const std::size_t i = static_cast<std::size_t>(f * kFrameSamples + n);
      if (i < wave.size()) ss += static_cast<double>(wave[i]) * wave[i];
    }
    fine.at(f, 8) = static_cast<Real>(std::log10(std::sqrt(ss / kFrameSamples) + 1e-3));
  }
  // Pairs of 40 Hz frames side by side; an odd tail repeats its last frame.
  const int pairs = (frames + 1) / 2;
  Tensor out = Tensor::matrix(pairs, kCaspFeatureDim);
  for (int p = 0; p < pairs; ++p) {
    const int second = std::min(2 * p + 1, frames - 1);
    for (int c = 0; c < kCaspBandDim; ++c) {
      out.at(p, c) = fine.at(2 * p, c);
      out.at(p, kCaspBandDim + c) = fine.at(second, c);
    }
  }
  return out;
}

std::vector<double> audio_envelope(std::span<const float> wave) {
  const int frames = frame_count(wave);
  std::vector<double> env(static_cast<std::size_t>(frames), 0.0);
  for (std::size_t i = 0; i < wave.size(); ++i) env[i / kFrameSamples] += static_cast<double>(wave[i]) * wave[i];
  for (auto& e : env) e = std::sqrt(e / kFrameSamples);
  return env;
}

std::vector<double> video_envelope(const Tensor& frames) {
  const int n = frames.rows(), d = frames.cols();
  std::vector<double> median(static_cast<std::size_t>(d));
  std::vector<double> col(static_cast<std::size_t>(n));
  for (int c = 0; c < d; ++c) {
    for (int r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = frames.at(r, c);
    std::nth_element(col.begin(), col.begin() + n / 2, col.end());
    median[static_cast<std::size_t>(c)] = col[static_cast<std::size_t>(n / 2)];
  }
  std::vector<double> energy(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    double ss = 0;
    for (int c = 0; c < d; ++c) {
      const double x = frames.at(r, c) - median[static_cast<std::size_t>(c)];
      ss += x * x;
    }
    energy[static_cast<std::size_t>(r)] = std::sqrt(ss);
  }
  std::vector<double> env(static_cast<std::size_t>(n), 0.0);
  for (int r = 1; r < n; ++r) env[static_cast<std::size_t>(r)] = std::max(0.0, energy[static_cast<std::size_t>(r)] - energy[static_cast<std::size_t>(r - 1)]);
  return env;
}

EmbedRole parse_embed_role(std::string_view name) {
  if (name == "panns-like" || name == "panns_like") return EmbedRole::panns_like;
  if (name == "vggish-like" || name == "vggish_like") return EmbedRole::vggish_like;
  if (name == "classifier-like" || name == "classifier_like") return EmbedRole::classifier_like;
  throw ValidationError("unknown embedder role '" + std::string(name) + "'");
}

std::vector<double> standin_embedder(std::span<const float> wave, EmbedRole role) {
  const Tensor spec = frame_spectrum(wave);
  const int frames = spec.rows();
  std::vector<double> logspec(static_cast<std::size_t>(frames * kBins));
  for (int f = 0; f < frames; ++f)
    for (int k = 0; k < kBins; ++k) logspec[static_cast<std::size_t>(f * kBins + k)] = std::log1p(spec.at(f, k));

  if (role == EmbedRole::classifier_like) {
    static const Projection proj = make_projection(0xC1A55ULL, kBins, kClassifierClasses);
    std::vector<double> logits(kClassifierClasses, 0.0);
    for (int f = 0; f < frames; ++f)
      for (int k = 0; k < kBins; ++k)
        for (int c = 0; c < kClassifierClasses; ++c)
          logits[static_cast<std::size_t>(c)] += 2.0 * logspec[static_cast<std::size_t>(f * kBins + k)] * proj.w[static_cast<std::size_t>(k * kClassifierClasses + c)] / frames;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
  }

  static const Projection panns = make_projection(0xFA115ULL, kBins, 16);
  static const Projection vggish = make_projection(0x766154ULL, kBins, 12);
  const Projection& p = role == EmbedRole::panns_like ? panns : vggish;
  std::vector<double> sum(static_cast<std::size_t>(p.out), 0.0), sq(static_cast<std::size_t>(p.out), 0.0);
  for (int f = 0; f < frames; ++f) {
    for (int o = 0; o < p.out; ++o) {
      double a = 0;
      for (int k = 0; k < kBins; ++k) a += logspec[static_cast<std::size_t>(f * kBins + k)] * p.w[static_cast<std::size_t>(k * p.out + o)];
      a = role == EmbedRole::panns_like ? std::max(a, 0.0) : std::tanh(a);
      sum[static_cast<std::size_t>(o)] += a;
      sq[static_cast<std::size_t>(o)] += a * a;
    }
  }
  std::vector<double> emb;
  for (int o = 0; o < p.out; ++o) {
    const double mean = sum[static_cast<std::size_t>(o)] / frames;
    emb.push_back(mean);
    emb.push_back(std::sqrt(std::max(0.0, sq[static_cast<std::size_t>(o)] / frames - mean * mean)));
  }
  return emb;
}

}  // namespace v2st::inline V2ST_REAL_NS::synthdata
