#include "v2st/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

namespace {

double eval_loss(const std::function<Var()>& loss_fn) {
  NoGradGuard guard;
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var()>& loss_fn, const std::vector<NamedParam>& params, double eps,
                           int max_coords_per_param, std::uint64_t seed) {
  for (const auto& p : params) {
    Var v = p.var;
    v.zero_grad();
  }
  Var loss = loss_fn();
  if (!std::isfinite(static_cast<double>(loss.item()))) throw NumericError("grad_check: loss is not finite");
  loss.backward();

  GradCheckReport report;
  Rng rng(seed);
  for (const auto& p : params) {
    Var var = p.var;
    const std::size_t n = var.value().size();
    std::vector<Real> analytic(n, Real{0});
    if (var.value().has_grad()) std::copy(var.grad().begin(), var.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (static_cast<int>(n) > max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng.engine());
      coords.resize(static_cast<std::size_t>(max_coords_per_param));
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      Tensor& w = var.mutable_value();
      const Real orig = w[i];
      w[i] = static_cast<Real>(orig + eps);
      const double up = eval_loss(loss_fn);
      w[i] = static_cast<Real>(orig - eps);
      const double down = eval_loss(loss_fn);
      w[i] = orig;
      const double fd = (up - down) / (2 * eps);
      const double ad = analytic[i];
      const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-8});
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace v2st::inline V2ST_REAL_NS
