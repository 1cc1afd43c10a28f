#include "v2st/metrics/distribution.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

namespace {

constexpr double kCovRidge = 1e-6;
constexpr double kProbFloor = 1e-10;

Eigen::MatrixXd regularized(const GaussianStats& s) {
  const int d = s.dim();
  if (static_cast<int>(s.cov.size()) != d * d) throw ValidationError("frechet: covariance size does not match mean");
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = s.cov[static_cast<std::size_t>(i * d + j)];
  m = 0.5 * (m + m.transpose());
  m.diagonal().array() += kCovRidge;
  return m;
}

void check_distribution_rows(const Rows& rows, const char* what) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double sum = 0;
    for (double p : rows[i]) {
      if (!(p >= 0)) throw ValidationError(std::string(what) + ": negative or NaN probability in row " + std::to_string(i));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw ValidationError(std::string(what) + ": row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double out = 0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] <= 0) continue;
    out += p[c] * (std::log(std::max(p[c], kProbFloor)) - std::log(std::max(q[c], kProbFloor)));
  }
  return out;
}

}  // namespace

GaussianStats gaussian_stats(const Rows& rows) {
  if (rows.empty()) throw ValidationError("gaussian_stats: no rows");
  const std::size_t d = rows[0].size();
  GaussianStats s{std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != d) throw ShapeError("gaussian_stats: ragged rows");
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(rows.size());
  if (rows.size() < 2) return s;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) s.cov[i * d + j] += (r[i] - s.mean[i]) * (r[j] - s.mean[j]);
  for (auto& c : s.cov) c /= static_cast<double>(rows.size() - 1);
  return s;
}

double frechet(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("frechet: dimension mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const Eigen::MatrixXd sa = regularized(a), sb = regularized(b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa), eb(sb);
  if (ea.eigenvalues().minCoeff() < 0 || eb.eigenvalues().minCoeff() < 0) {
    throw ValidationError("frechet: covariance is not positive semidefinite after regularization");
  }
  const Eigen::MatrixXd root_a =
      ea.eigenvectors() * ea.eigenvalues().cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_root = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double mean_term = 0;
  for (int i = 0; i < a.dim(); ++i) {
    const double d = a.mean[static_cast<std::size_t>(i)] - b.mean[static_cast<std::size_t>(i)];
    mean_term += d * d;
  }
  return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * tr_root);
}

double kl_metric(const Rows& gen, const Rows& ref) {
  if (gen.size() != ref.size() || gen.empty()) throw ValidationError("kl_metric: need equal, non-zero row counts");
  check_distribution_rows(gen, "kl_metric");
  check_distribution_rows(ref, "kl_metric");
  double total = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (gen[i].size() != ref[i].size()) throw ShapeError("kl_metric: class count differs in row " + std::to_string(i));
    total += kl(ref[i], gen[i]);
  }
  return total / static_cast<double>(gen.size());
}

double inception_score(const Rows& posteriors) {
  if (posteriors.empty()) throw ValidationError("inception_score: no rows");
  check_distribution_rows(posteriors, "inception_score");
  const std::size_t c = posteriors[0].size();
  std::vector<double> mean(c, 0.0);
  for (const auto& p : posteriors) {
    if (p.size() != c) throw ShapeError("inception_score: ragged rows");
    for (std::size_t k = 0; k < c; ++k) mean[k] += p[k];
  }
  for (auto& m : mean) m /= static_cast<double>(posteriors.size());
  double total = 0;
  for (const auto& p : posteriors) total += kl(p, mean);
  return std::exp(total / static_cast<double>(posteriors.size()));
}

}  // namespace v2st::inline V2ST_REAL_NS::metrics
