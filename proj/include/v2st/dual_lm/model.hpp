#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "v2st/aligner/aligner.hpp"
#include "v2st/frontend/speaker.hpp"
#include "v2st/frontend/token_embed.hpp"
#include "v2st/numerics/layers.hpp"

namespace v2st::inline V2ST_REAL_NS::dual_lm {

struct ModelConfig {
  int codec_vocab = 256;
  int text_vocab = 320;
  int dim = 64;
  int layers = 4;
  int heads = 4;
  int mlp_dim = 256;
  int max_len = 256;
  int video_dim = 64;
  int mel_dim = 32;
  int speaker_dim = 64;
  int audio_eos = 252;
  int speech_eos = 253;
  int pad = 255;
};

// Row spans of the LM input: [speaker | text | BOS + multimodal steps].
struct SequenceLayout {
  int text_len = 0;
  int steps = 0;  // T

  int spk_begin() const { return 0; }
  int spk_end() const { return 1; }
  int text_begin() const { return 1; }
  int text_end() const { return 1 + text_len; }
  int mm_begin() const { return 1 + text_len; }  // BOS row
  int mm_end() const { return 2 + text_len + steps; }
  int total() const { return mm_end(); }
};

struct DualLogits {
  Var audio;   // [T, V]
  Var speech;  // [T, V]
};

// One conditioning bundle for teacher-forced scoring. A missing token stream
// is fed as the stream's NULL embedding.
struct LmInput {
  Tensor video;        // [T, d_v], already rate-matched to the token length
  std::vector<int> text_ids;
  Tensor speaker_mel;  // pooled mel [1, d_mel]; all-zero means "no speaker"
  std::optional<std::vector<int>> audio_ids;
  std::optional<std::vector<int>> speech_ids;

  int steps() const { return video.empty() ? 0 : video.rows(); }
};

struct BuiltSequence {
  Var rows;  // [L, d]
  SequenceLayout layout;
};

class DualLm {
 public:
  DualLm(const ModelConfig& config, std::uint64_t seed);
  DualLm(const DualLm&) = delete;
  DualLm& operator=(const DualLm&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // SpeakerEmbedding for a pooled mel row; zero in, zero out.
  Var speaker_embedding(const Tensor& pooled_mel) const { return speaker_(pooled_mel); }
  aligner::FusedStreams fuse(const LmInput& in) const;
  BuiltSequence build_sequence(const Var& speaker, std::span<const int> text_ids,
                               const aligner::FusedStreams& fused) const;
  // Causal pre-norm transformer stack followed by a final norm.
  Var forward(const Var& seq) const;
  // Heads read the rows BOS..step T-2, so logits row t predicts token t. A
  // truncated hidden state yields only the rows it covers.
  DualLogits dual_heads(const Var& hidden, const SequenceLayout& layout) const;

  DualLogits score(const LmInput& in) const;

  const frontend::TokenEmbedder& tokens() const { return tokens_; }
  aligner::Aligner& aligner() { return aligner_; }
  const aligner::Aligner& aligner() const { return aligner_; }
  const layers::Linear& audio_head() const { return audio_head_; }
  const layers::Linear& speech_head() const { return speech_head_; }

 private:
  ModelConfig config_;
  ParamStore store_;
  frontend::SpeakerEncoder speaker_;
  frontend::TokenEmbedder tokens_;
  aligner::Aligner aligner_;
  layers::Linear spk_proj_;
  Var text_table_;
  Var bos_;
  Var positions_;
  std::vector<layers::TransformerBlock> blocks_;
  layers::RmsNorm final_norm_;
  layers::Linear audio_head_, speech_head_;
};

}  // namespace v2st::inline V2ST_REAL_NS::dual_lm
