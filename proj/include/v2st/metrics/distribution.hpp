#pragma once

#include <vector>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS::metrics {

// Rows of equal length; used for embeddings and class posteriors.
using Rows = std::vector<std::vector<double>>;

struct GaussianStats {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major [dim, dim]

  int dim() const { return static_cast<int>(mean.size()); }
};

// Sample mean and unbiased covariance (zero covariance for a single row).
GaussianStats gaussian_stats(const Rows& rows);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)) with both covariances
// regularized by 1e-6 I. The trace of the root is taken from the eigenvalues
// of Sa^(1/2) Sb Sa^(1/2). Throws ValidationError on a dimension mismatch or a
// covariance that is not PSD after regularization.
double frechet(const GaussianStats& a, const GaussianStats& b);

// Mean over paired rows of KL(ref_i || gen_i), probabilities floored at 1e-10.
// Throws ValidationError if a row does not sum to 1 within 1e-5.
double kl_metric(const Rows& gen, const Rows& ref);

// exp(mean_i KL(p_i || p_bar)).
double inception_score(const Rows& posteriors);

}  // namespace v2st::inline V2ST_REAL_NS::metrics
