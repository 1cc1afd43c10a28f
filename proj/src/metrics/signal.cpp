#include "v2st/metrics/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

double energy_db(std::span<const float> wave) {
  if (wave.empty()) throw ValidationError("energy_db: empty waveform");
  double ss = 0;
  for (float x : wave) ss += static_cast<double>(x) * x;
  return 10.0 * std::log10(ss / static_cast<double>(wave.size()) + 1e-12);
}

bool filter_pair(std::span<const float> audio_wave, std::span<const float> speech_wave, double threshold_db) {
  return !(energy_db(audio_wave) < threshold_db || energy_db(speech_wave) < threshold_db);
}

PeakList detect_peaks(std::span<const double> envelope, double frame_rate, double min_prominence,
                      double min_separation) {
  const int n = static_cast<int>(envelope.size());
  if (n < 3) throw ValidationError("detect_peaks: need at least 3 envelope samples, got " + std::to_string(n));
  if (!(frame_rate > 0)) throw ValidationError("detect_peaks: frame_rate must be positive");
  const auto e = [&](int i) { return envelope[static_cast<std::size_t>(i)]; };

  std::vector<int> candidates;
  for (int i = 1; i + 1 < n; ++i) {
    if (!(e(i) > e(i - 1) && e(i) >= e(i + 1))) continue;
    // Bases stop at the first strictly higher sample on each side.
    double left_base = e(i), right_base = e(i);
    for (int j = i - 1; j >= 0; --j) {
      if (e(j) > e(i)) break;
      left_base = std::min(left_base, e(j));
    }
    for (int j = i + 1; j < n; ++j) {
      if (e(j) > e(i)) break;
      right_base = std::min(right_base, e(j));
    }
    if (e(i) - std::max(left_base, right_base) >= min_prominence) candidates.push_back(i);
  }

  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) { return e(a) > e(b); });
  std::vector<int> kept;
  for (int c : candidates) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](int k) {
      return std::abs(c - k) / frame_rate >= min_separation;
    });
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  PeakList out;
  for (int k : kept) out.times.push_back(k / frame_rate);
  return out;
}

PeakList detect_peaks_normalized(std::span<const double> envelope, double frame_rate, const PeakConfig& cfg) {
  double mx = 0;
  for (double v : envelope) mx = std::max(mx, v);
  if (!(mx > 0)) return {};
  std::vector<double> scaled(envelope.begin(), envelope.end());
  for (auto& v : scaled) v /= mx;
  return detect_peaks(scaled, frame_rate, cfg.min_prominence, cfg.min_separation);
}

double av_align(const PeakList& audio, const PeakList& video, double window) {
  if (!(window > 0)) throw ValidationError("av_align: window must be positive");
  const auto& a = audio.times;
  const auto& v = video.times;
  if (a.empty() && v.empty()) return 1.0;
  if (a.empty() || v.empty()) return 0.0;
  // A small slack keeps the test |ta - tv| <= window stable under a common shift.
  constexpr double kSlack = 1e-9;
  std::size_t i = 0, j = 0, matched = 0;
  while (i < a.size() && j < v.size()) {
    if (std::abs(a[i] - v[j]) <= window + kSlack) {
      ++matched;
      ++i;
      ++j;
    } else if (a[i] < v[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const double m = static_cast<double>(matched);
  return m / (static_cast<double>(a.size() + v.size()) - m);
}

}  // namespace v2st::inline V2ST_REAL_NS::metrics
