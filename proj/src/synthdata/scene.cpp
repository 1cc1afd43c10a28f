#include "v2st/synthdata/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/params.hpp"
#include "v2st/synthdata/features.hpp"

namespace v2st::inline V2ST_REAL_NS::synthdata {

namespace {

constexpr std::uint64_t kWorldSeed = 0x5CE11E5EEDULL;
constexpr std::array<float, kMotifLength> kMotifAmp{0.9f, 0.7f, 0.5f, 0.35f};
constexpr std::array<float, 6> kBumpShape{1.0f, 1.0f, 0.9f, 0.9f, 0.8f, 0.8f};
// Speech ducks under an event by a class-dependent depth that follows the
// motif envelope.
float duck_gain(int cls, int j) { return 1.0f - (0.5f + 0.05f * static_cast<float>(cls)) * kMotifAmp[static_cast<std::size_t>(j)] / kMotifAmp[0]; }

const std::array<const char*, 40> kWords{
    "the", "dog", "barks", "door", "opens", "rain", "falls", "bell", "rings", "car",  "horn", "wind",  "blows", "glass",
    "breaks", "step", "runs", "cat",  "jumps", "boat", "waves", "clock", "ticks", "bird", "sings", "fire", "burns", "drum",
    "beats", "water", "drips", "train", "moves", "leaf", "lands", "hand", "claps", "ball", "bounces", "light"};

// Class directions and ambience vectors shared by every scene.
struct World {
  std::array<std::vector<float>, kEventClasses> class_dir;
  std::array<std::vector<float>, kAmbiences> ambience;

  World() {
    Rng rng(kWorldSeed);
    auto unit = [&](double norm) {
      std::vector<double> v(kVideoDim);
      double ss = 0;
      for (auto& x : v) {
        x = rng.normal();
        ss += x * x;
      }
      std::vector<float> out(kVideoDim);
      for (int i = 0; i < kVideoDim; ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(norm * v[static_cast<std::size_t>(i)] / std::sqrt(ss));
      return out;
    };
    for (auto& d : class_dir) d = unit(3.0);
    for (auto& a : ambience) a = unit(2.0);
  }
};

const World& world() {
  static const World w;
  return w;
}

void add_tone(std::vector<float>& frame, int bin, float amp) {
  for (int n = 0; n < kFrameSamples; ++n) {
    frame[static_cast<std::size_t>(n)] += amp * static_cast<float>(std::sin(2.0 * std::numbers::pi * bin * n / kFrameSamples));
  }
}

std::vector<float> speech_frame(int code, int speaker) {
  std::vector<float> f(kFrameSamples, 0.0f);
  add_tone(f, 1 + code, 0.3f);
  add_tone(f, 28 + speaker % 4, 0.06f + 0.03f * static_cast<float>(speaker / 4));
  return f;
}

void validate(const SceneSpec& s) {
  const int chars = static_cast<int>(s.transcript.size());
  if (chars == 0) throw ValidationError("scene: empty transcript");
  if (s.speaker < 0 || s.speaker >= kSpeakers) throw ValidationError("scene: speaker id out of range");
  if (s.ambience < 0 || s.ambience >= kAmbiences) throw ValidationError("scene: ambience id out of range");
  if (std::abs(s.duration_s - chars * kGrid) > 1e-9) {
    throw ValidationError("scene: duration must equal 0.05 s per transcript character");
  }
  if (s.events.empty()) throw ValidationError("scene: needs at least one event");
  for (const auto& e : s.events) {
    if (e.cls < 0 || e.cls >= kEventClasses) throw ValidationError("scene: event class out of range");
    if (!(e.onset_s > 0) || e.onset_s + kMotifLength / static_cast<double>(kTokenRate) > s.duration_s + 1e-9) {
      throw ValidationError("scene: event onset " + std::to_string(e.onset_s) + " outside (0, duration - 0.1]");
    }
    if (std::abs(e.onset_s / kGrid - std::round(e.onset_s / kGrid)) > 1e-9) {
      throw ValidationError("scene: event onset off the 0.05 s grid");
    }
  }
  for (char c : s.transcript) (void)char_code(c);
}

}  // namespace

int char_code(char c) {
  if (c == ' ') return 26;
  if (c >= 'a' && c <= 'z') return c - 'a';
  throw ValidationError(std::string("scene: transcript character '") + c + "' outside [a-z ]");
}

int background_id(int ambience, int step) { return ambience * 4 + (step / 2) % 4; }
int motif_id(int cls, int j) { return kMotifBase + cls * 8 + j; }
int speech_id(char c, int speaker) { return kSpeechBase + char_code(c) * 4 + speaker % 4; }
bool is_motif(int audio_id) { return audio_id >= kMotifBase && audio_id < kSpeechBase; }

std::vector<float> token_frame(int id) {
  std::vector<float> f(kFrameSamples, 0.0f);
  if (id < 0 || id >= kCodecVocab) throw IndexError("token_frame: id " + std::to_string(id) + " outside codec vocab");
  if (id < kMotifBase) {
    add_tone(f, 2 + id, 0.08f);
  } else if (id < kSpeechBase) {
    const int cls = (id - kMotifBase) / 8, j = (id - kMotifBase) % 8;
    if (j < kMotifLength) add_tone(f, 3 + 3 * cls + j, kMotifAmp[static_cast<std::size_t>(j)]);
  } else if (id < kAudioEos) {
    return speech_frame((id - kSpeechBase) / 4, (id - kSpeechBase) % 4);
  }
  return f;
}

std::vector<int> onset_steps(const SceneSpec& spec) {
  std::vector<int> out;
  for (const auto& e : spec.events) out.push_back(static_cast<int>(std::lround(e.onset_s * kTokenRate)));
  return out;
}

SceneSpec random_scene(std::uint64_t seed, int speaker) {
  Rng rng(seed);
  SceneSpec s;
  s.seed = seed;
  s.speaker = speaker;
  s.ambience = rng.index(kAmbiences);
  const int chars = 20 + rng.index(11);
  std::string text;
  while (static_cast<int>(text.size()) < chars) {
    if (!text.empty()) text += ' ';
    text += kWords[static_cast<std::size_t>(rng.index(static_cast<int>(kWords.size())))];
  }
  text.resize(static_cast<std::size_t>(chars));
  if (text.back() == ' ') text.back() = 's';
  s.transcript = text;
  s.duration_s = chars * kGrid;

  // Grid slots 2..chars-2 keep the onset off frame 0 and the motif inside the clip.
  const int count = 2 + rng.index(3);
  std::vector<int> slots;
  for (int attempt = 0; attempt < 1000 && static_cast<int>(slots.size()) < count; ++attempt) {
    const int slot = 2 + rng.index(chars - 3);
    const bool clear = std::all_of(slots.begin(), slots.end(), [&](int o) { return std::abs(o - slot) >= 4; });
    if (clear) slots.push_back(slot);
  }
  std::sort(slots.begin(), slots.end());
  for (int slot : slots) s.events.push_back({slot * kGrid, rng.index(kEventClasses)});
  return s;
}

MultimodalSample gen_scene(const SceneSpec& spec) {
  validate(spec);
  const World& w = world();
  Rng rng(derive_seed(spec.seed, 1));
  const int chars = static_cast<int>(spec.transcript.size());
  const int steps = chars * kTokensPerChar;

  MultimodalSample out;
  out.id = "scene-" + std::to_string(spec.seed);
  out.spec = spec;
  out.text = spec.transcript;

  auto& audio = out.tokens.audio_ids;
  auto& speech = out.tokens.speech_ids;
  for (int t = 0; t < steps; ++t) {
    audio.push_back(background_id(spec.ambience, t));
    speech.push_back(speech_id(spec.transcript[static_cast<std::size_t>(t / kTokensPerChar)], spec.speaker));
  }
  std::vector<float> gain(static_cast<std::size_t>(steps), 1.0f);
  for (const auto& e : spec.events) {
    const int k = static_cast<int>(std::lround(e.onset_s * kTokenRate));
    for (int j = 0; j < kMotifLength; ++j) {
      audio[static_cast<std::size_t>(k + j)] = motif_id(e.cls, j);
      gain[static_cast<std::size_t>(k + j)] = duck_gain(e.cls, j);
    }
  }

  for (int t = 0; t < steps; ++t) {
    const auto a = token_frame(audio[static_cast<std::size_t>(t)]);
    out.audio_wave.insert(out.audio_wave.end(), a.begin(), a.end());
    auto s = speech_frame(char_code(spec.transcript[static_cast<std::size_t>(t / kTokensPerChar)]), spec.speaker);
    for (auto& x : s) x *= gain[static_cast<std::size_t>(t)];
    out.speech_wave.insert(out.speech_wave.end(), s.begin(), s.end());
  }
  audio.push_back(kAudioEos);
  speech.push_back(kSpeechEos);
  out.tokens.rate_hz = kTokenRate;

  // Raw video: frames at 0, 1/60, ..., duration inclusive.
  const int frames = static_cast<int>(std::lround(spec.duration_s * kVideoFps)) + 1;
  Tensor video = Tensor::matrix(frames, kVideoDim);
  std::vector<double> noise(kVideoDim, 0.0);
  const auto& amb = w.ambience[static_cast<std::size_t>(spec.ambience)];
  for (int f = 0; f < frames; ++f) {
    for (int d = 0; d < kVideoDim; ++d) {
      noise[static_cast<std::size_t>(d)] = 0.9 * noise[static_cast<std::size_t>(d)] + 0.05 * rng.normal();
      video.at(f, d) = static_cast<Real>(amb[static_cast<std::size_t>(d)] + noise[static_cast<std::size_t>(d)]);
    }
  }
  for (const auto& e : spec.events) {
    const int f0 = static_cast<int>(std::lround(e.onset_s * kVideoFps));
    const auto& dir = w.class_dir[static_cast<std::size_t>(e.cls)];
    for (std::size_t b = 0; b < kBumpShape.size(); ++b) {
      for (int d = 0; d < kVideoDim; ++d) {
        video.at(f0 + static_cast<int>(b), d) += static_cast<Real>(kBumpShape[b] * dir[static_cast<std::size_t>(d)]);
      }
    }
  }
  out.video = {std::move(video), static_cast<double>(kVideoFps)};
  out.speaker_mel = mel_frames(out.speech_wave);
  return out;
}

Split gen_split(int n_train, int n_eval, std::uint64_t seed) {
  if (n_train < 1 || n_eval < 1) throw ValidationError("gen_split: sizes must be >= 1");
  constexpr int kTrainSpeakers = 12;
  Split split;
  for (int i = 0; i < n_train; ++i) {
    split.train.push_back(random_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), i % kTrainSpeakers));
  }
  for (int i = 0; i < n_eval; ++i) {
    split.eval.push_back(random_scene(derive_seed(seed, static_cast<std::uint64_t>(n_train + i)),
                                      kTrainSpeakers + i % (kSpeakers - kTrainSpeakers)));
  }
  return split;
}

}  // namespace v2st::inline V2ST_REAL_NS::synthdata
