#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "v2st/numerics/autograd.hpp"

namespace v2st::inline V2ST_REAL_NS {

// Seeded generator used for initialization, sampling and data synthesis.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Uniform integer in [0, n).
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Deterministic seed derivation (splitmix64) for per-sample generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

struct NamedParam {
  std::string name;
  Var var;
};

// Ordered registry of trainable leaves. Names are unique.
class ParamStore {
 public:
  Var add(std::string name, Tensor init);
  Var get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<NamedParam>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t numel() const;
  void zero_grad();

  // Copies of all parameter values, in registration order.
  std::vector<Tensor> snapshot() const;
  bool equals(const std::vector<Tensor>& snapshot) const;

 private:
  std::vector<NamedParam> params_;
};

}  // namespace v2st::inline V2ST_REAL_NS
