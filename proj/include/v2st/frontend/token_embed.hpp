#pragma once

#include <span>
#include <string>
#include <vector>

#include "v2st/numerics/params.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

enum class Stream { audio, speech };

struct DualTokenStreams {
  std::vector<int> audio_ids;
  std::vector<int> speech_ids;
  double rate_hz = 40.0;
};

// Two independent lookup tables over the codec vocabulary plus one learned
// NULL row per stream that stands in for an absent stream.
class TokenEmbedder {
 public:
  TokenEmbedder() = default;
  TokenEmbedder(ParamStore& store, const std::string& name, int vocab, int dim, Rng& rng);

  // Throws IndexError for ids outside [0, vocab).
  Var operator()(std::span<const int> ids, Stream stream) const;
  // [T, dim] rows of the stream's NULL embedding.
  Var null_rows(int length, Stream stream) const;

  Var table(Stream stream) const { return stream == Stream::audio ? audio_ : speech_; }
  int vocab() const { return audio_.rows(); }
  int dim() const { return audio_.cols(); }

 private:
  Var audio_, speech_;
  Var audio_null_, speech_null_;
};

}  // namespace v2st::inline V2ST_REAL_NS::frontend
