#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "v2st/frontend/bpe.hpp"
#include "v2st/frontend/speaker.hpp"
#include "v2st/frontend/token_embed.hpp"
#include "v2st/frontend/video.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/numerics/ops.hpp"
#include "v2st/numerics/optim.hpp"

using namespace v2st;
using namespace v2st::frontend;

namespace {

std::vector<std::string> frozen_corpus() {
  return {"the dog barks near the door", "a bell rings twice", "rain on the window", "she opens the door slowly",
          std::string(kVideoToAudioPrompt)};
}

}  // namespace

TEST(Bpe, SingleCandidatePair) {
  const std::vector<std::string> corpus{"aaaa"};
  const auto tok = BpeTokenizer::train(corpus, 258);
  ASSERT_GE(tok.merges().size(), 1u);
  EXPECT_EQ(tok.merges()[0], Merge('a', 'a'));
}

TEST(Bpe, NoRepeatedPairGivesNoMerges) {
  const std::vector<std::string> corpus{"abcdef"};
  EXPECT_TRUE(BpeTokenizer::train(corpus, 300).merges().empty());
}

TEST(Bpe, HandSimulatedMerges) {
  // abab x2: pairs ab=4, ba=2 -> merge (a,b)=256; then "256 256" x2 -> (256,256)=257.
  const std::vector<std::string> corpus{"abab", "abab"};
  const auto tok = BpeTokenizer::train(corpus, 260);
  const std::vector<Merge> expected{{'a', 'b'}, {256, 256}};
  EXPECT_EQ(tok.merges(), expected);
  EXPECT_EQ(tok.encode("abab").ids, std::vector<int>{257});
}

TEST(Bpe, TieBreaksOnSmallestPair) {
  // "cd" and "ab" both occur twice; (a,b) sorts first.
  const std::vector<std::string> corpus{"cdab", "cdab"};
  const auto tok = BpeTokenizer::train(corpus, 257);
  EXPECT_EQ(tok.merges().at(0), Merge('a', 'b'));
}

TEST(Bpe, EmptyCorpusAndSmallVocabRejected) {
  const std::vector<std::string> none;
  EXPECT_THROW(BpeTokenizer::train(none, 300), ValidationError);
  const std::vector<std::string> one{"ab"};
  EXPECT_THROW(BpeTokenizer::train(one, 256), ValidationError);
}

TEST(Bpe, EmptyString) {
  const auto tok = BpeTokenizer::train(frozen_corpus(), 300);
  const auto seq = tok.encode("");
  EXPECT_TRUE(seq.ids.empty());
  EXPECT_EQ(tok.decode(seq), "");
}

TEST(Bpe, RandomByteRoundTrip) {
  const auto tok = BpeTokenizer::train(frozen_corpus(), 320);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::string s(static_cast<std::size_t>(rng.index(40)), '\0');
    for (auto& c : s) c = static_cast<char>(rng.index(3) == 0 ? rng.index(256) : "the door"[rng.index(8)]);
    const auto seq = tok.encode(s);
    for (int id : seq.ids) ASSERT_LT(id, seq.vocab_size);
    ASSERT_EQ(tok.decode(seq), s);
  }
}

TEST(Bpe, DecodeRejectsUnknownId) {
  const auto tok = BpeTokenizer::train(frozen_corpus(), 300);
  const std::vector<int> bad{tok.vocab_size()};
  EXPECT_THROW(tok.decode(bad), IndexError);
}

TEST(Bpe, FrozenPromptEncoding) {
  const auto tok = BpeTokenizer::train(frozen_corpus(), 300);
  const std::vector<int> snapshot{71, 265, 101, 266, 116, 256, 97, 117, 100, 105, 111, 32, 102, 262, 260, 118, 105, 100, 101, 111, 46};
  EXPECT_EQ(tok.encode(kVideoToAudioPrompt).ids, snapshot);
  const auto reloaded = BpeTokenizer::from_json(tok.to_json());
  EXPECT_EQ(reloaded.encode(kVideoToAudioPrompt).ids, snapshot);
}

TEST(Speaker, ConstantFramesEqualSingleFrameProjection) {
  Rng rng(1);
  ParamStore store;
  SpeakerEncoder enc(store, "spk", 4, 6, rng);
  const Tensor frame = Tensor::row({0.5f, -1.0f, 2.0f, 0.25f});
  Tensor frames = Tensor::matrix(7, 4);
  for (int r = 0; r < 7; ++r) std::copy(frame.values().begin(), frame.values().end(), frames.row_span(r).begin());
  const auto a = enc(frames).value();
  const auto b = enc.project(frame.reshaped({1, 4})).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Speaker, PermutationInvariant) {
  Rng rng(2);
  ParamStore store;
  SpeakerEncoder enc(store, "spk", 3, 5, rng);
  Tensor frames = normal_tensor({6, 3}, 1.0, rng);
  Tensor reversed = Tensor::matrix(6, 3);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 3; ++c) reversed.at(r, c) = frames.at(5 - r, c);
  const auto a = enc(frames).value();
  const auto b = enc(reversed).value();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Speaker, ZeroFramesRejectedAndZeroMeanIsZero) {
  Rng rng(3);
  ParamStore store;
  SpeakerEncoder enc(store, "spk", 3, 5, rng);
  EXPECT_THROW(SpeakerEncoder::pool(Tensor()), ValidationError);
  const Var zero = enc(Tensor::matrix(4, 3));
  for (Real v : zero.value().values()) EXPECT_EQ(v, 0);
}

TEST(Speaker, RandomCropLengthAndShortClip) {
  Rng rng(4);
  Tensor frames = normal_tensor({200, 3}, 1.0, rng);
  EXPECT_EQ(SpeakerEncoder::random_crop(frames, 120, rng).rows(), 120);
  EXPECT_EQ(SpeakerEncoder::random_crop(frames, 300, rng).rows(), 200);
}

TEST(TokenEmbed, TablesAreIndependent) {
  Rng rng(6);
  ParamStore store;
  TokenEmbedder emb(store, "tok", 16, 8, rng);
  const std::vector<int> ids{3};
  EXPECT_FALSE(same_values(emb(ids, Stream::audio).value(), emb(ids, Stream::speech).value()));
  const std::vector<int> zeros{0, 0};
  const auto rows = emb(zeros, Stream::audio).value();
  for (int c = 0; c < 8; ++c) EXPECT_EQ(rows.at(0, c), rows.at(1, c));
  EXPECT_THROW(emb(std::vector<int>{16}, Stream::speech), IndexError);
}

TEST(TokenEmbed, GradientOnlyOnLookedUpRowsAndTable) {
  Rng rng(7);
  ParamStore store;
  TokenEmbedder emb(store, "tok", 10, 4, rng);
  const std::vector<int> ids{2, 5, 2};
  ops::sum(ops::square(emb(ids, Stream::audio))).backward();
  const Var table = emb.table(Stream::audio);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 4; ++c) {
      const Real g = table.grad()[static_cast<std::size_t>(r * 4 + c)];
      if (r == 2 || r == 5) {
        EXPECT_NE(g, 0);
      } else {
        EXPECT_EQ(g, 0);
      }
    }
  }
  // Finite-difference spot check on row 2: d/dx sum(x^2) over two lookups = 4x.
  EXPECT_NEAR(table.grad()[8], 4 * table.value()[8], 1e-5);
  for (Real g : emb.table(Stream::speech).grad()) EXPECT_EQ(g, 0);
}

TEST(TokenEmbed, ZeroingOneTableGradLeavesOtherUpdate) {
  auto run = [](bool zero_speech) {
    Rng rng(8);
    ParamStore store;
    TokenEmbedder emb(store, "tok", 6, 3, rng);
    AdamState state(store);
    const std::vector<int> ids{1, 4};
    ops::sum(ops::mul(emb(ids, Stream::audio), emb(ids, Stream::speech))).backward();
    if (zero_speech) {
      Var s = emb.table(Stream::speech);
      s.zero_grad();
    }
    adam_step(store, state, 0.01);
    return emb.table(Stream::audio).value();
  };
  EXPECT_TRUE(same_values(run(false), run(true)));
}

TEST(Video, Subsample) {
  auto make = [](int n) {
    Tensor f = Tensor::matrix(n, 1);
    for (int i = 0; i < n; ++i) f[static_cast<std::size_t>(i)] = static_cast<Real>(i);
    return VideoFeatureSeq{f, 60.0};
  };
  const auto nine = subsample_frames(make(9), 3);
  EXPECT_EQ(std::vector<Real>(nine.frames.values().begin(), nine.frames.values().end()), (std::vector<Real>{0, 3, 6}));
  EXPECT_DOUBLE_EQ(nine.fps, 20.0);
  const auto ten = subsample_frames(make(10), 3);
  EXPECT_EQ(std::vector<Real>(ten.frames.values().begin(), ten.frames.values().end()), (std::vector<Real>{0, 3, 6, 9}));
  EXPECT_TRUE(same_values(subsample_frames(make(5), 1).frames, make(5).frames));
}

TEST(Video, NearestIndices) {
  EXPECT_EQ(nearest_indices(2, 4), (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(nearest_indices(5, 5), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(nearest_indices(1, 5), (std::vector<int>(5, 0)));
  EXPECT_EQ(nearest_indices(7, 1), (std::vector<int>{0}));
  // Half-up: t=1 of 3 outputs from 2 rows is exactly 0.5 -> row 1.
  EXPECT_EQ(nearest_indices(2, 3), (std::vector<int>{0, 1, 1}));
}

TEST(Video, ResampleOnlyUsesInputRows) {
  Rng rng(9);
  const Tensor frames = normal_tensor({7, 3}, 1.0, rng);
  for (int target : {1, 3, 7, 20}) {
    const Tensor out = resample_video({frames, 20.0}, target);
    ASSERT_EQ(out.rows(), target);
    for (int t = 0; t < target; ++t) {
      bool found = false;
      for (int r = 0; r < 7 && !found; ++r) found = std::equal(out.row_span(t).begin(), out.row_span(t).end(), frames.row_span(r).begin());
      EXPECT_TRUE(found);
    }
  }
}
