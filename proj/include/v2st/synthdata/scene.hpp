#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "v2st/frontend/token_embed.hpp"
#include "v2st/frontend/video.hpp"

namespace v2st::inline V2ST_REAL_NS::synthdata {

inline constexpr int kSampleRate = 2560;
inline constexpr int kFrameSamples = 64;  // one token frame
inline constexpr int kTokenRate = kSampleRate / kFrameSamples;  // 40 Hz
inline constexpr int kVideoFps = 60;
inline constexpr int kVideoStride = 3;
inline constexpr int kVideoDim = 64;
inline constexpr int kMelDim = 32;
inline constexpr int kEventClasses = 8;
inline constexpr int kSpeakers = 16;
inline constexpr int kAmbiences = 4;
inline constexpr int kTokensPerChar = 2;
inline constexpr int kMotifLength = 4;
inline constexpr double kGrid = 0.05;  // onset and duration grid, seconds

// Codec id layout shared by both streams.
inline constexpr int kCodecVocab = 256;
inline constexpr int kMotifBase = 16;
inline constexpr int kSpeechBase = 128;
inline constexpr int kAudioEos = 252;
inline constexpr int kSpeechEos = 253;
inline constexpr int kPad = 255;

struct EventSpec {
  double onset_s = 0.0;
  int cls = 0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  std::vector<EventSpec> events;
  int speaker = 0;
  int ambience = 0;
  std::string transcript;
};

struct MultimodalSample {
  std::string id;
  SceneSpec spec;
  frontend::VideoFeatureSeq video;     // raw 60 fps features, 60*duration + 1 frames
  std::string text;
  Tensor speaker_mel;                  // [F, kMelDim] mel frames of the speech track
  frontend::DualTokenStreams tokens;   // content tokens followed by EOS
  std::vector<float> audio_wave;
  std::vector<float> speech_wave;

  int steps() const { return static_cast<int>(tokens.audio_ids.size()); }
};

// Draws a valid spec: transcript of 20..30 characters, duration 0.05 s per
// character, 2..4 events on the 0.05 s grid at least 0.2 s apart.
SceneSpec random_scene(std::uint64_t seed, int speaker);
// Throws ValidationError for an invalid spec. Deterministic.
MultimodalSample gen_scene(const SceneSpec& spec);

struct Split {
  std::vector<SceneSpec> train;
  std::vector<SceneSpec> eval;
};
// Train speakers are 0..11, eval speakers 12..15; seeds never overlap.
Split gen_split(int n_train, int n_eval, std::uint64_t seed);

int background_id(int ambience, int step);
int motif_id(int cls, int j);
int speech_id(char c, int speaker);
int char_code(char c);
bool is_motif(int audio_id);

// Waveform frame for one token id (phase reset per frame). EOS/PAD are silent.
std::vector<float> token_frame(int id);

// Audio onset steps, in tokens.
std::vector<int> onset_steps(const SceneSpec& spec);

}  // namespace v2st::inline V2ST_REAL_NS::synthdata
