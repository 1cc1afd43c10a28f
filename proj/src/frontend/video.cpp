#include "v2st/frontend/video.hpp"

#include <algorithm>
#include <string>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

VideoFeatureSeq subsample_frames(const VideoFeatureSeq& video, int stride) {
  if (stride < 1) throw ValidationError("subsample_frames: stride must be >= 1, got " + std::to_string(stride));
  const int n = video.num_frames();
  const int d = video.frames.cols();
  const int kept = (n + stride - 1) / stride;
  Tensor out = Tensor::matrix(kept, d);
  for (int i = 0; i < kept; ++i) {
    const auto src = video.frames.row_span(i * stride);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return {std::move(out), video.fps / stride};
}

std::vector<int> nearest_indices(int n, int target_len) {
  if (n < 1) throw ValidationError("resample_video: source has no frames");
  if (target_len < 1) throw ValidationError("resample_video: target_len must be >= 1");
  std::vector<int> idx(static_cast<std::size_t>(target_len), 0);
  if (n == 1 || target_len == 1) return idx;
  const long long num = n - 1, den = target_len - 1;
  for (int t = 0; t < target_len; ++t) {
    // floor(t*num/den + 1/2)
    idx[static_cast<std::size_t>(t)] = static_cast<int>((2 * t * num + den) / (2 * den));
  }
  return idx;
}

Tensor resample_rows(const Tensor& rows, int target_len) {
  const auto idx = nearest_indices(rows.empty() ? 0 : rows.rows(), target_len);
  const int d = rows.cols();
  Tensor out = Tensor::matrix(target_len, d);
  for (int t = 0; t < target_len; ++t) {
    const auto src = rows.row_span(idx[static_cast<std::size_t>(t)]);
    std::copy(src.begin(), src.end(), out.row_span(t).begin());
  }
  return out;
}

}  // namespace v2st::inline V2ST_REAL_NS::frontend
