#pragma once

#include <span>
#include <vector>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

// 10*log10(mean(w^2) + 1e-12). Throws ValidationError for an empty wave.
double energy_db(std::span<const float> wave);

// False (discard) iff either track is strictly below `threshold_db`.
bool filter_pair(std::span<const float> audio_wave, std::span<const float> speech_wave,
                 double threshold_db = -40.0);

struct PeakList {
  std::vector<double> times;  // seconds, strictly increasing
};

struct PeakConfig {
  double min_prominence = 0.2;
  double min_separation = 0.1;  // seconds
};

// Interior local maxima with topographic prominence >= min_prominence, then
// greedy suppression by height (earlier index wins ties) within
// min_separation seconds.
PeakList detect_peaks(std::span<const double> envelope, double frame_rate, double min_prominence,
                      double min_separation);

// Scales the envelope to a unit maximum before detection, so the prominence
// threshold is relative.
PeakList detect_peaks_normalized(std::span<const double> envelope, double frame_rate, const PeakConfig& cfg = {});

// Greedy one-to-one matching in time order within `window` seconds;
// IoU = M / (|A| + |V| - M). Empty vs empty is 1, empty vs non-empty is 0.
double av_align(const PeakList& audio, const PeakList& video, double window = 0.1);

}  // namespace v2st::inline V2ST_REAL_NS::metrics
