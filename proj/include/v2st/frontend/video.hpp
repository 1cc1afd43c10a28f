#pragma once

#include <vector>

#include "v2st/numerics/tensor.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

struct VideoFeatureSeq {
  Tensor frames;  // [N, d_v]
  double fps = 0.0;

  int num_frames() const { return frames.empty() ? 0 : frames.rows(); }
};

// Keeps frames 0, stride, 2*stride, ... and divides fps by stride.
VideoFeatureSeq subsample_frames(const VideoFeatureSeq& video, int stride = 3);

// Source row for each of `target_len` outputs: round(t * (n-1) / (target_len-1))
// with half-up rounding, computed in integers.
std::vector<int> nearest_indices(int n, int target_len);

// Gathers rows of `rows` at nearest_indices(rows.rows(), target_len).
Tensor resample_rows(const Tensor& rows, int target_len);

inline Tensor resample_video(const VideoFeatureSeq& video, int target_len) {
  return resample_rows(video.frames, target_len);
}

}  // namespace v2st::inline V2ST_REAL_NS::frontend
