#include "v2st/frontend/token_embed.hpp"

#include "v2st/numerics/ops.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

TokenEmbedder::TokenEmbedder(ParamStore& store, const std::string& name, int vocab, int dim, Rng& rng) {
  audio_ = store.add(name + ".audio", normal_tensor({vocab, dim}, 1.0, rng));
  speech_ = store.add(name + ".speech", normal_tensor({vocab, dim}, 1.0, rng));
  audio_null_ = store.add(name + ".audio_null", normal_tensor({1, dim}, 1.0, rng));
  speech_null_ = store.add(name + ".speech_null", normal_tensor({1, dim}, 1.0, rng));
}

Var TokenEmbedder::operator()(std::span<const int> ids, Stream stream) const {
  return ops::gather_rows(table(stream), ids);
}

Var TokenEmbedder::null_rows(int length, Stream stream) const {
  return ops::repeat_row(stream == Stream::audio ? audio_null_ : speech_null_, length);
}

}  // namespace v2st::inline V2ST_REAL_NS::frontend
