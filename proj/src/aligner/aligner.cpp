#include "v2st/aligner/aligner.hpp"

#include <numeric>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::aligner {

namespace {

void check_lengths(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError(std::string(op) + ": stream lengths differ (" + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
}

Var positions(int length, int dim) {
  std::vector<double> pos(static_cast<std::size_t>(length));
  std::iota(pos.begin(), pos.end(), 0.0);
  return Var::constant(layers::sinusoidal(pos, dim));
}

}  // namespace

CrossBlock::CrossBlock(ParamStore& store, const std::string& name, int dim, Rng& rng)
    : q_(store, name + ".q", dim, dim, rng, false),
      k_(store, name + ".k", dim, dim, rng, false),
      v_(store, name + ".v", dim, dim, rng, false),
      o_(store, name + ".o", dim, dim, rng, false, 0.5) {}

Var CrossBlock::operator()(const Var& query_in, const Var& key_in, const Var& value_in,
                           const AttentionMask& mask) const {
  return o_(masked_attention(q_(query_in), k_(key_in), v_(value_in), mask));
}

void CrossBlock::zero_output() {
  Var w = o_.weight();
  w.mutable_value().fill(Real{0});
}

Var causal_cross(const CrossBlock& block, const Var& query_stream, const Var& kv_stream) {
  check_lengths("causal_cross", query_stream, kv_stream);
  const int t = query_stream.rows();
  return block(query_stream, kv_stream, kv_stream, AttentionMask::causal(t, t));
}

Var noncausal_cross(const CrossBlock& block, const Var& stream, const Var& video) {
  check_lengths("noncausal_cross", stream, video);
  const int t = stream.rows();
  return block(stream, video, video, AttentionMask::non_causal(t, t));
}

Aligner::Aligner(ParamStore& store, const std::string& name, int dim, int video_dim, Rng& rng)
    : dim_(dim),
      video_proj_(store, name + ".video_proj", video_dim, dim, rng),
      audio_from_speech_(store, name + ".audio_from_speech", dim, rng),
      speech_from_audio_(store, name + ".speech_from_audio", dim, rng),
      audio_from_video_(store, name + ".audio_from_video", dim, rng),
      speech_from_video_(store, name + ".speech_from_video", dim, rng) {}

FusedStreams Aligner::operator()(const AlignerInput& in) const {
  check_lengths("align", in.audio, in.speech);
  check_lengths("align", in.audio, in.video);
  if (in.audio.cols() != dim_ || in.speech.cols() != dim_) {
    throw ShapeError("align: stream width must be " + std::to_string(dim_));
  }
  const int t = in.audio.rows();
  const Var video = project_video(in.video);
  const Var pos = positions(t, dim_);
  const Var video_keys = ops::add(video, pos);
  const auto full = AttentionMask::non_causal(t, t);

  Var h_a = ops::add(in.audio, causal_cross(audio_from_speech_, in.audio, in.speech));
  h_a = ops::add(h_a, audio_from_video_(ops::add(in.audio, pos), video_keys, video, full));
  Var h_s = ops::add(in.speech, causal_cross(speech_from_audio_, in.speech, in.audio));
  h_s = ops::add(h_s, speech_from_video_(ops::add(in.speech, pos), video_keys, video, full));
  return {h_a, h_s};
}

void Aligner::zero_output_projections() {
  audio_from_speech_.zero_output();
  speech_from_audio_.zero_output();
  audio_from_video_.zero_output();
  speech_from_video_.zero_output();
}

}  // namespace v2st::inline V2ST_REAL_NS::aligner
