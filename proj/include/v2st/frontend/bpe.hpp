#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

struct TextTokenSeq {
  std::vector<int> ids;
  int vocab_size = 256;
};

using Merge = std::pair<int, int>;

// Byte-level BPE. Ids 0..255 are raw bytes; merge i produces id 256 + i.
class BpeTokenizer {
 public:
  BpeTokenizer() = default;
  explicit BpeTokenizer(std::vector<Merge> merges);

  // Greedy training: repeatedly merges the most frequent adjacent pair (ties
  // broken by the lexicographically smallest pair) until `vocab_size` ids
  // exist or no pair occurs at least twice. Throws ValidationError for an
  // empty corpus or vocab_size <= 256.
  static BpeTokenizer train(std::span<const std::string> corpus, int vocab_size);

  TextTokenSeq encode(std::string_view text) const;
  // Throws IndexError for ids outside the vocabulary.
  std::string decode(std::span<const int> ids) const;
  std::string decode(const TextTokenSeq& seq) const { return decode(seq.ids); }

  int vocab_size() const { return 256 + static_cast<int>(merges_.size()); }
  const std::vector<Merge>& merges() const { return merges_; }

  nlohmann::json to_json() const;
  static BpeTokenizer from_json(const nlohmann::json& j);

 private:
  void rebuild();

  std::vector<Merge> merges_;
  std::vector<std::string> token_bytes_;
};

// The fixed text prompt used for every video-to-audio example.
inline constexpr std::string_view kVideoToAudioPrompt = "Generate audio for the video.";

}  // namespace v2st::inline V2ST_REAL_NS::frontend
