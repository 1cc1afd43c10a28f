#pragma once

#include <string>

#include "v2st/numerics/layers.hpp"

namespace v2st::inline V2ST_REAL_NS::aligner {

struct AlignerInput {
  Var audio;   // E_a [T, d]
  Var speech;  // E_s [T, d]
  Var video;   // raw features already resampled to T, [T, d_v]
};

struct FusedStreams {
  Var audio;   // H_a [T, d]
  Var speech;  // H_s [T, d]
};

// Single-head cross-attention with its own q/k/v/o projections. Returns the
// attention output only; the caller adds the residual.
class CrossBlock {
 public:
  CrossBlock() = default;
  CrossBlock(ParamStore& store, const std::string& name, int dim, Rng& rng);

  Var operator()(const Var& query_in, const Var& key_in, const Var& value_in, const AttentionMask& mask) const;
  void zero_output();

  const layers::Linear& q() const { return q_; }
  const layers::Linear& k() const { return k_; }
  const layers::Linear& v() const { return v_; }
  const layers::Linear& o() const { return o_; }

 private:
  layers::Linear q_, k_, v_, o_;
};

// Query t sees kv positions <= t. Throws ShapeError on a length mismatch.
Var causal_cross(const CrossBlock& block, const Var& query_stream, const Var& kv_stream);
// Every query position sees every video position.
Var noncausal_cross(const CrossBlock& block, const Var& stream, const Var& video);

// Two intra-modal causal blocks (audio<->speech) and two inter-modal
// non-causal blocks (audio<-video, speech<-video), summed per stream with the
// residual. The video blocks see fixed sinusoidal positions on their query
// and key inputs so they can align in time.
class Aligner {
 public:
  Aligner() = default;
  Aligner(ParamStore& store, const std::string& name, int dim, int video_dim, Rng& rng);

  FusedStreams operator()(const AlignerInput& in) const;

  // Projects [T, d_v] video rows to [T, d].
  Var project_video(const Var& video) const { return video_proj_(video); }
  void zero_output_projections();

  const CrossBlock& audio_from_speech() const { return audio_from_speech_; }
  const CrossBlock& speech_from_audio() const { return speech_from_audio_; }
  const CrossBlock& audio_from_video() const { return audio_from_video_; }
  const CrossBlock& speech_from_video() const { return speech_from_video_; }

 private:
  int dim_ = 0;
  layers::Linear video_proj_;
  CrossBlock audio_from_speech_, speech_from_audio_;
  CrossBlock audio_from_video_, speech_from_video_;
};

}  // namespace v2st::inline V2ST_REAL_NS::aligner
