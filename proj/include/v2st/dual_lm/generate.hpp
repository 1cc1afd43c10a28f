#pragma once

#include <cstdint>

#include "v2st/dual_lm/model.hpp"
#include "v2st/frontend/video.hpp"

namespace v2st::inline V2ST_REAL_NS::dual_lm {

struct Sampling {
  enum class Kind { greedy, top_k };
  Kind kind = Kind::greedy;
  int k = 1;
  double temperature = 1.0;

  static Sampling greedy() { return {}; }
  static Sampling top_k(int k, double temperature) { return {Kind::top_k, k, temperature}; }
};

struct GenerateRequest {
  frontend::VideoFeatureSeq video;  // resampled to max_steps internally
  std::vector<int> text_ids;
  Tensor speaker_mel;               // pooled [1, d_mel]; zero for none
  int max_steps = 0;
  bool audio_on = true;             // a disabled stream is fed NULL and emits PAD
  bool speech_on = true;
  Sampling sampling;
  std::uint64_t seed = 0;
};

struct Generation {
  frontend::DualTokenStreams streams;
  // Step at which each stream emitted EOS, or -1.
  int audio_eos_step = -1;
  int speech_eos_step = -1;
  int steps_run = 0;
};

// Autoregressive decoding with a full-prefix recompute per step. Future input
// positions hold PAD; stream causality in the aligner and the LM makes them
// invisible to the current step. Throws ValidationError if max_steps <= 0.
Generation generate(const DualLm& model, const GenerateRequest& request);

// Index of the token chosen from a logits row.
int sample_token(std::span<const Real> logits, const Sampling& sampling, Rng& rng);

}  // namespace v2st::inline V2ST_REAL_NS::dual_lm
