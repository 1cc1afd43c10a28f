#include "v2st/dual_lm/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::dual_lm {

int sample_token(std::span<const Real> logits, const Sampling& sampling, Rng& rng) {
  if (logits.empty()) throw ValidationError("sample_token: empty logits");
  const auto argmax = [&] {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  };
  if (sampling.kind == Sampling::Kind::greedy || sampling.k <= 1 || sampling.temperature <= 0) return argmax();

  std::vector<int> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const auto k = static_cast<std::size_t>(std::min<int>(sampling.k, static_cast<int>(logits.size())));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](int a, int b) {
    return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)] ||
           (logits[static_cast<std::size_t>(a)] == logits[static_cast<std::size_t>(b)] && a < b);
  });
  const double top = logits[static_cast<std::size_t>(order[0])];
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = std::exp((logits[static_cast<std::size_t>(order[i])] - top) / sampling.temperature);
  }
  double u = rng.uniform() * std::accumulate(w.begin(), w.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    u -= w[i];
    if (u < 0) return order[i];
  }
  return order[k - 1];
}

Generation generate(const DualLm& model, const GenerateRequest& request) {
  const auto& cfg = model.config();
  const int steps = request.max_steps;
  if (steps <= 0) throw ValidationError("generate: max_steps must be positive");
  if (request.video.num_frames() < 1) throw ValidationError("generate: video has no frames");
  NoGradGuard no_grad;
  Rng rng(request.seed);

  LmInput in;
  in.video = frontend::resample_video(request.video, steps);
  in.text_ids = request.text_ids;
  in.speaker_mel = request.speaker_mel;
  std::vector<int> audio(static_cast<std::size_t>(steps), cfg.pad);
  std::vector<int> speech(static_cast<std::size_t>(steps), cfg.pad);

  Generation out;
  bool audio_done = !request.audio_on, speech_done = !request.speech_on;
  const Var speaker = model.speaker_embedding(in.speaker_mel);
  for (int t = 0; t < steps && !(audio_done && speech_done); ++t) {
    in.audio_ids = request.audio_on ? std::optional(audio) : std::nullopt;
    in.speech_ids = request.speech_on ? std::optional(speech) : std::nullopt;
    const auto built = model.build_sequence(speaker, in.text_ids, model.fuse(in));
    const Var prefix = ops::slice_rows(built.rows, 0, built.layout.mm_begin() + t + 1);
    const auto logits = model.dual_heads(model.forward(prefix), built.layout);
    if (!audio_done) {
      const int id = sample_token(logits.audio.value().row_span(t), request.sampling, rng);
      audio[static_cast<std::size_t>(t)] = id;
      if (id == cfg.audio_eos) {
        audio_done = true;
        out.audio_eos_step = t;
      }
    }
    if (!speech_done) {
      const int id = sample_token(logits.speech.value().row_span(t), request.sampling, rng);
      speech[static_cast<std::size_t>(t)] = id;
      if (id == cfg.speech_eos) {
        speech_done = true;
        out.speech_eos_step = t;
      }
    }
    out.steps_run = t + 1;
  }
  out.streams.audio_ids = std::move(audio);
  out.streams.speech_ids = std::move(speech);
  return out;
}

}  // namespace v2st::inline V2ST_REAL_NS::dual_lm
