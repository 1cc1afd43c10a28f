#pragma once

#include <string>

#include "v2st/numerics/layers.hpp"

namespace v2st::inline V2ST_REAL_NS::frontend {

// Global speaker vector: a learned bias-free projection of the mean mel frame.
// A zero mean maps to the zero vector, which doubles as "no speaker".
class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  SpeakerEncoder(ParamStore& store, const std::string& name, int d_mel, int d_spk, Rng& rng);

  // Mean over frames of a [F, d_mel] tensor. Throws ValidationError when F = 0.
  static Tensor pool(const Tensor& mel_frames);
  // Picks a contiguous crop of `crop_frames` rows uniformly at random, or the
  // whole clip when it is shorter.
  static Tensor random_crop(const Tensor& mel_frames, int crop_frames, Rng& rng);

  Var project(const Tensor& pooled) const { return proj_(Var::constant(pooled)); }
  Var operator()(const Tensor& mel_frames) const { return project(pool(mel_frames)); }

  int d_mel() const { return proj_.in_features(); }
  int d_spk() const { return proj_.out_features(); }

 private:
  layers::Linear proj_;
};

}  // namespace v2st::inline V2ST_REAL_NS::frontend
