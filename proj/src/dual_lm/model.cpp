#include "v2st/dual_lm/model.hpp"

#include <string>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::dual_lm {

DualLm::DualLm(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng(seed);
  const int d = config.dim;
  speaker_ = frontend::SpeakerEncoder(store_, "speaker", config.mel_dim, config.speaker_dim, rng);
  tokens_ = frontend::TokenEmbedder(store_, "tokens", config.codec_vocab, d, rng);
  aligner_ = aligner::Aligner(store_, "aligner", d, config.video_dim, rng);
  spk_proj_ = layers::Linear(store_, "spk_proj", config.speaker_dim, d, rng);
  text_table_ = store_.add("text_embed", normal_tensor({config.text_vocab, d}, 1.0, rng));
  bos_ = store_.add("bos", normal_tensor({1, d}, 1.0, rng));
  positions_ = store_.add("positions", normal_tensor({config.max_len, d}, 0.1, rng));
  for (int l = 0; l < config.layers; ++l) {
    blocks_.emplace_back(store_, "lm.block" + std::to_string(l), d, config.heads, config.mlp_dim, rng);
  }
  final_norm_ = layers::RmsNorm(store_, "lm.final_norm", d);
  // Small heads start close to the uniform prediction.
  audio_head_ = layers::Linear(store_, "head.audio", d, config.codec_vocab, rng, true, 0.1);
  speech_head_ = layers::Linear(store_, "head.speech", d, config.codec_vocab, rng, true, 0.1);
}

aligner::FusedStreams DualLm::fuse(const LmInput& in) const {
  const int t = in.steps();
  if (t < 1) throw ValidationError("dual_lm: input has no time steps");
  if (in.video.cols() != config_.video_dim) {
    throw ShapeError("dual_lm: video width " + std::to_string(in.video.cols()) + ", expected " +
                     std::to_string(config_.video_dim));
  }
  auto embed = [&](const std::optional<std::vector<int>>& ids, frontend::Stream stream, const char* name) {
    if (!ids) return tokens_.null_rows(t, stream);
    if (static_cast<int>(ids->size()) != t) {
      throw ShapeError(std::string("dual_lm: ") + name + " stream has " + std::to_string(ids->size()) +
                       " tokens for " + std::to_string(t) + " steps");
    }
    return tokens_(*ids, stream);
  };
  return aligner_({embed(in.audio_ids, frontend::Stream::audio, "audio"),
                   embed(in.speech_ids, frontend::Stream::speech, "speech"), Var::constant(in.video)});
}

BuiltSequence DualLm::build_sequence(const Var& speaker, std::span<const int> text_ids,
                                     const aligner::FusedStreams& fused) const {
  SequenceLayout layout{static_cast<int>(text_ids.size()), fused.audio.rows()};
  if (layout.total() > config_.max_len) {
    throw ValidationError("dual_lm: sequence length " + std::to_string(layout.total()) + " exceeds max_len " +
                          std::to_string(config_.max_len));
  }
  std::vector<Var> parts{spk_proj_(speaker)};
  if (!text_ids.empty()) parts.push_back(ops::gather_rows(text_table_, text_ids));
  parts.push_back(bos_);
  parts.push_back(ops::add(fused.audio, fused.speech));
  Var rows = ops::concat_rows(parts);
  rows = ops::add(rows, ops::slice_rows(positions_, 0, layout.total()));
  return {rows, layout};
}

Var DualLm::forward(const Var& seq) const {
  if (seq.rows() < 1) throw ValidationError("dual_lm: empty sequence");
  const int l = seq.rows();
  const auto mask = AttentionMask::causal(l, l);
  Var h = seq;
  for (const auto& block : blocks_) h = block(h, mask);
  return final_norm_(h);
}

DualLogits DualLm::dual_heads(const Var& hidden, const SequenceLayout& layout) const {
  const int begin = layout.mm_begin();
  const int end = std::min(begin + layout.steps, hidden.rows());
  if (end <= begin) throw ShapeError("dual_heads: hidden state does not reach the multimodal span");
  const Var rows = ops::slice_rows(hidden, begin, end);
  return {audio_head_(rows), speech_head_(rows)};
}

DualLogits DualLm::score(const LmInput& in) const {
  const auto fused = fuse(in);
  const auto built = build_sequence(speaker_embedding(in.speaker_mel), in.text_ids, fused);
  return dual_heads(forward(built.rows), built.layout);
}

}  // namespace v2st::inline V2ST_REAL_NS::dual_lm
