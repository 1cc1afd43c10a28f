#include "v2st/frontend/speaker.hpp"

#include <algorithm>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

SpeakerEncoder::SpeakerEncoder(ParamStore& store, const std::string& name, int d_mel, int d_spk, Rng& rng)
    : proj_(store, name + ".proj", d_mel, d_spk, rng, /*bias=*/false) {}

Tensor SpeakerEncoder::pool(const Tensor& mel_frames) {
  const int f = mel_frames.empty() ? 0 : mel_frames.rows();
  if (f == 0) throw ValidationError("speaker_embed: no mel frames");
  const int d = mel_frames.cols();
  std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
  for (int r = 0; r < f; ++r)
    for (int c = 0; c < d; ++c) acc[static_cast<std::size_t>(c)] += mel_frames.at(r, c);
  Tensor out = Tensor::matrix(1, d);
  for (int c = 0; c < d; ++c) out[static_cast<std::size_t>(c)] = static_cast<Real>(acc[static_cast<std::size_t>(c)] / f);
  return out;
}

Tensor SpeakerEncoder::random_crop(const Tensor& mel_frames, int crop_frames, Rng& rng) {
  const int f = mel_frames.rows();
  if (crop_frames <= 0 || f <= crop_frames) return mel_frames;
  const int start = rng.index(f - crop_frames + 1);
  const int d = mel_frames.cols();
  const auto first = mel_frames.storage().begin() + static_cast<std::ptrdiff_t>(start) * d;
  return Tensor({crop_frames, d}, std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(crop_frames) * d));
}

}  // namespace v2st::inline V2ST_REAL_NS::frontend
