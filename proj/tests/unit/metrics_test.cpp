#include <gtest/gtest.h>

#include <cmath>

#include "v2st/metrics/casp.hpp"
#include "v2st/metrics/distribution.hpp"
#include "v2st/metrics/signal.hpp"
#include "v2st/numerics/errors.hpp"
#include "v2st/synthdata/features.hpp"
#include "v2st/synthdata/scene.hpp"

using namespace v2st;
using namespace v2st::metrics;

TEST(EnergyDb, ReferenceLevels) {
  std::vector<float> square(100);
  for (std::size_t i = 0; i < square.size(); ++i) square[i] = i % 2 ? 1.0f : -1.0f;
  EXPECT_NEAR(energy_db(square), 0.0, 1e-9);
  EXPECT_NEAR(energy_db(std::vector<float>(50, 0.1f)), -20.0, 1e-5);
  EXPECT_NEAR(energy_db(std::vector<float>(50, 0.0f)), -120.0, 1e-9);
  EXPECT_THROW(energy_db(std::vector<float>{}), ValidationError);
}

TEST(FilterPair, StrictThreshold) {
  const std::vector<float> minus20(64, 0.1f), minus50(64, static_cast<float>(std::pow(10.0, -2.5)));
  EXPECT_TRUE(filter_pair(minus20, minus20));
  EXPECT_FALSE(filter_pair(minus20, minus50));
  // A constant 0.01 wave sits at -40 dB up to the 1e-12 floor and float rounding.
  std::vector<double> exact(64, 0.01);
  const std::vector<float> minus40(exact.begin(), exact.end());
  EXPECT_NEAR(energy_db(minus40), -40.0, 1e-5);
  EXPECT_TRUE(filter_pair(minus40, minus20, energy_db(minus40)));
  EXPECT_TRUE(filter_pair(minus40, minus20, -40.0 - 1e-5));
}

TEST(DetectPeaks, MonotoneSingleAndMerged) {
  const std::vector<double> ramp{0, 1, 2, 3, 4, 5};
  EXPECT_TRUE(detect_peaks(ramp, 10, 0.1, 0.1).times.empty());
  const std::vector<double> tri{0, 1, 2, 3, 2, 1, 0};
  const auto one = detect_peaks(tri, 10, 0.1, 0.1);
  ASSERT_EQ(one.times.size(), 1u);
  EXPECT_DOUBLE_EQ(one.times[0], 0.3);
  // Apexes at 0.05 s and 0.10 s (frame rate 40) -> only the larger one survives.
  const std::vector<double> two{0, 1, 3, 1, 2, 0, 0};
  const auto merged = detect_peaks(two, 40, 0.5, 0.1);
  ASSERT_EQ(merged.times.size(), 1u);
  EXPECT_DOUBLE_EQ(merged.times[0], 0.05);
  EXPECT_EQ(detect_peaks(two, 40, 0.5, 0.04).times.size(), 2u);
  EXPECT_THROW(detect_peaks(std::vector<double>{1, 2}, 10, 0.1, 0.1), ValidationError);
}

TEST(AvAlign, EnumeratedCases) {
  EXPECT_DOUBLE_EQ(av_align({{1.0, 2.0}}, {{1.0, 2.0}}, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(av_align({{1.0, 2.0}}, {{3.0, 4.0}}, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(av_align({{1.0, 2.0}}, {{1.0, 3.0}}, 0.1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(av_align({}, {}, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(av_align({}, {{1.0}}, 0.1), 0.0);
}

TEST(AvAlign, SymmetricAndShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    PeakList a, v;
    double t = 0;
    for (int i = 0; i < 1 + rng.index(6); ++i) a.times.push_back(t += rng.uniform(0.05, 0.5));
    t = 0;
    for (int i = 0; i < 1 + rng.index(6); ++i) v.times.push_back(t += rng.uniform(0.05, 0.5));
    const double base = av_align(a, v, 0.1);
    EXPECT_DOUBLE_EQ(base, av_align(v, a, 0.1));
    PeakList as = a, vs = v;
    for (auto& x : as.times) x += 0.75;
    for (auto& x : vs.times) x += 0.75;
    EXPECT_DOUBLE_EQ(base, av_align(as, vs, 0.1));
  }
}

namespace {

GaussianStats stats_1d(double mean, double var) { return {{mean}, {var}}; }

GaussianStats random_stats(Rng& rng, int d) {
  Rows rows;
  for (int i = 0; i < 3 * d; ++i) {
    std::vector<double> r(static_cast<std::size_t>(d));
    for (auto& x : r) x = rng.normal();
    rows.push_back(r);
  }
  return gaussian_stats(rows);
}

}  // namespace

TEST(Frechet, ClosedForms) {
  EXPECT_NEAR(frechet(stats_1d(0, 1), stats_1d(1, 1)), 1.0, 1e-6);
  EXPECT_NEAR(frechet(stats_1d(0, 1), stats_1d(0, 4)), 1.0, 1e-6);
  Rng rng(5);
  const auto a = random_stats(rng, 4);
  EXPECT_NEAR(frechet(a, a), 0.0, 1e-6);
  EXPECT_THROW(frechet(a, stats_1d(0, 1)), ValidationError);
  EXPECT_THROW(frechet(stats_1d(0, -1), stats_1d(0, 1)), ValidationError);
}

TEST(Frechet, SymmetricAndRotationInvariant) {
  Rng rng(6);
  const int d = 3;
  const auto a = random_stats(rng, d), b = random_stats(rng, d);
  EXPECT_NEAR(frechet(a, b), frechet(b, a), 1e-6);
  // Rotation about the z axis applied to both.
  const double th = 0.7, c = std::cos(th), s = std::sin(th);
  const double r[3][3] = {{c, -s, 0}, {s, c, 0}, {0, 0, 1}};
  auto rotate = [&](const GaussianStats& g) {
    GaussianStats o{std::vector<double>(3, 0.0), std::vector<double>(9, 0.0)};
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) o.mean[static_cast<std::size_t>(i)] += r[i][k] * g.mean[static_cast<std::size_t>(k)];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) o.cov[static_cast<std::size_t>(i * 3 + j)] += r[i][k] * g.cov[static_cast<std::size_t>(k * 3 + l)] * r[j][l];
    return o;
  };
  EXPECT_NEAR(frechet(a, b), frechet(rotate(a), rotate(b)), 1e-4);
}

TEST(KlMetric, AnalyticCases) {
  const Rows p{{0.2, 0.3, 0.5}, {0.1, 0.1, 0.8}};
  EXPECT_NEAR(kl_metric(p, p), 0.0, 1e-12);
  const int c = 5;
  const Rows uniform{std::vector<double>(c, 1.0 / c)};
  Rows one_hot{std::vector<double>(c, 0.0)};
  one_hot[0][2] = 1.0;
  EXPECT_NEAR(kl_metric(uniform, one_hot), std::log(static_cast<double>(c)), 1e-12);
  EXPECT_THROW(kl_metric({{0.5, 0.6}}, {{0.5, 0.5}}), ValidationError);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Rows g(1, std::vector<double>(4)), r(1, std::vector<double>(4));
    double sg = 0, sr = 0;
    for (int k = 0; k < 4; ++k) {
      sg += g[0][static_cast<std::size_t>(k)] = rng.uniform();
      sr += r[0][static_cast<std::size_t>(k)] = rng.uniform();
    }
    for (int k = 0; k < 4; ++k) {
      g[0][static_cast<std::size_t>(k)] /= sg;
      r[0][static_cast<std::size_t>(k)] /= sr;
    }
    EXPECT_GE(kl_metric(g, r), 0.0);
  }
}

TEST(InceptionScore, AnalyticCases) {
  const int c = 6;
  EXPECT_NEAR(inception_score(Rows(4, std::vector<double>(c, 1.0 / c))), 1.0, 1e-12);
  Rows eye(c, std::vector<double>(c, 0.0));
  for (int i = 0; i < c; ++i) eye[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  EXPECT_NEAR(inception_score(eye), static_cast<double>(c), 1e-9);
  EXPECT_NEAR(inception_score(Rows(3, {0.7, 0.2, 0.1})), 1.0, 1e-12);
  const double is = inception_score({{0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}});
  EXPECT_GE(is, 1.0);
  EXPECT_LE(is, 3.0);
}

namespace {

CaspConfig tiny_casp() {
  CaspConfig c;
  c.feature_dim = 3;
  c.dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.mlp_dim = 16;
  c.embed_dim = 8;
  c.crop_frames = 12;
  c.steps = 150;
  c.batch = 2;
  c.lr = 1e-2;
  return c;
}

}  // namespace

TEST(Casp, PoolingOfConstantSequenceIsProjectedConstant) {
  Rng rng(8);
  ParamStore store;
  AttentionPool pool(store, "pool", 4, 2, rng);
  const Tensor row = normal_tensor({1, 4}, 1.0, rng);
  Tensor rows = Tensor::matrix(5, 4);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 4; ++c) rows.at(r, c) = row[static_cast<std::size_t>(c)];
  const Tensor pooled = pool(Var::constant(rows)).value();
  // Value projection of the row, computed by pooling the row alone.
  const Tensor single = pool(Var::constant(row)).value();
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(pooled[static_cast<std::size_t>(c)], single[static_cast<std::size_t>(c)], 1e-6);
}

TEST(Casp, TrimmingPaddingIsExact) {
  CaspModel model(tiny_casp());
  Rng rng(9);
  const Tensor feats = normal_tensor({7, 3}, 1.0, rng);
  NoGradGuard guard;
  const Tensor trimmed = model.audio_branch()(feats, true).value();
  const Tensor padded = model.audio_branch()(feats, false).value();
  for (std::size_t i = 0; i < trimmed.size(); ++i) EXPECT_NEAR(trimmed[i], padded[i], 1e-6);
  double norm = 0;
  for (Real v : trimmed.values()) norm += static_cast<double>(v) * v;
  EXPECT_NEAR(norm, 1.0, 1e-5);
}

TEST(Casp, IndistinguishablePairsGiveLogBatch) {
  // Identical items make every logit equal, whatever the temperature.
  CaspConfig cfg;
  CaspModel model(cfg);
  Rng rng(12);
  const CaspPair item{normal_tensor({30, cfg.feature_dim}, 1.0, rng), normal_tensor({30, cfg.feature_dim}, 1.0, rng)};
  const std::vector<const CaspPair*> batch(8, &item);
  EXPECT_NEAR(model.contrastive_loss(batch).item(), std::log(8.0), 1e-5);
}

TEST(Casp, SeparablePairsTrain) {
  auto cfg = tiny_casp();
  CaspModel model(cfg);
  std::vector<CaspPair> pairs;
  for (int i = 0; i < 2; ++i) {
    Tensor a = Tensor::matrix(6, 3, i == 0 ? 1.0f : -1.0f);
    Tensor s = Tensor::matrix(6, 3, i == 0 ? 0.5f : -0.5f);
    pairs.push_back({a, s});
  }
  const auto log = casp_train(model, pairs);
  EXPECT_LT(log.losses.back(), 0.1);
  EXPECT_THROW(casp_train(model, {pairs[0]}), ValidationError);
  const double score = dual_score(model, pairs[0].audio, pairs[0].speech);
  EXPECT_LE(std::abs(score), 1.0);
  const auto r = topk_retrieval(model, pairs, {1});
  EXPECT_DOUBLE_EQ(r.accuracy[0], 1.0);
}

TEST(Casp, SingleItemRetrievalIsPerfect) {
  CaspModel model(tiny_casp());
  Rng rng(11);
  const std::vector<CaspPair> one{{normal_tensor({4, 3}, 1.0, rng), normal_tensor({4, 3}, 1.0, rng)}};
  EXPECT_DOUBLE_EQ(topk_retrieval(model, one, {1}).accuracy[0], 1.0);
  EXPECT_THROW(topk_retrieval(model, one, {1, 3}), ValidationError);
}

TEST(Casp, UntrainedRetrievalNearChance) {
  // Over several random models on 100 random pairs, top-1 stays near 1/100.
  double total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = tiny_casp();
    cfg.seed = 100 + seed;
    CaspModel model(cfg);
    Rng rng(200 + seed);
    std::vector<CaspPair> pairs;
    for (int i = 0; i < 100; ++i) pairs.push_back({normal_tensor({5, 3}, 1.0, rng), normal_tensor({5, 3}, 1.0, rng)});
    total += topk_retrieval(model, pairs, {1}).accuracy[0];
  }
  // 500 Bernoulli(0.01) trials: mean 5 hits, sd ~2.2; 20 hits is far out.
  EXPECT_LT(total * 100, 20);
}

TEST(Casp, SyntheticPairsConcentrateOnDiagonal) {
  const auto split = synthdata::gen_split(96, 20, 41);
  auto to_pair = [](const synthdata::SceneSpec& s) {
    const auto m = synthdata::gen_scene(s);
    return CaspPair{synthdata::casp_features(m.audio_wave), synthdata::casp_features(m.speech_wave)};
  };
  std::vector<CaspPair> train, held;
  for (const auto& s : split.train) train.push_back(to_pair(s));
  for (const auto& s : split.eval) held.push_back(to_pair(s));
  CaspConfig cfg;
  cfg.dim = 32;
  cfg.mlp_dim = 64;
  cfg.embed_dim = 32;
  cfg.steps = 250;
  cfg.batch = 16;
  CaspModel model(cfg);
  casp_train(model, train);
  const auto r = topk_retrieval(model, held, {1});
  EXPECT_GT(r.mean_matched - r.mean_mismatched, 0.2);
}
