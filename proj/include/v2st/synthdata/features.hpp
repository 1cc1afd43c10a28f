#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "v2st/numerics/tensor.hpp"

namespace v2st::inline V2ST_REAL_NS::synthdata {

// DFT magnitudes of consecutive 64-sample frames, bins 0..32: [F, 33].
Tensor frame_spectrum(std::span<const float> wave);
// log1p magnitudes of bins 1..32: [F, 32].
Tensor mel_frames(std::span<const float> wave);
// Per 40 Hz frame: 8 log10 band energies plus log10 RMS, floored at -4 and
// -3 so silent bands stay near the active range. Consecutive frame pairs are
// concatenated into 20 Hz rows: [ceil(F / 2), 18].
Tensor casp_features(std::span<const float> wave);
inline constexpr int kCaspBandDim = 9;
inline constexpr int kCaspFeatureDim = 2 * kCaspBandDim;
inline constexpr double kCaspFrameRate = 20.0;

// Per-token RMS of the waveform.
std::vector<double> audio_envelope(std::span<const float> wave);
// Half-wave rectified change of the distance to the per-dimension median
// frame; one value per video frame.
std::vector<double> video_envelope(const Tensor& frames);

enum class EmbedRole { panns_like, vggish_like, classifier_like };
EmbedRole parse_embed_role(std::string_view name);
inline constexpr int kClassifierClasses = 8;

// Fixed random-projection filterbank statistics (one embedding row per wave)
// or, for classifier_like, a softmax posterior over kClassifierClasses.
std::vector<double> standin_embedder(std::span<const float> wave, EmbedRole role);

}  // namespace v2st::inline V2ST_REAL_NS::synthdata
