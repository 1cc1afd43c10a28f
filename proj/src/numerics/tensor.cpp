#include "v2st/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape_) + " given " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::matrix(int rows, int cols, Real fill) { return Tensor({rows, cols}, fill); }

Tensor Tensor::row(std::vector<Real> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::scalar(Real value) { return Tensor({1, 1}, std::vector<Real>{value}); }

std::span<Real> Tensor::row_span(int r) {
  const auto c = static_cast<std::size_t>(cols());
  return std::span<Real>(data_).subspan(static_cast<std::size_t>(r) * c, c);
}

std::span<const Real> Tensor::row_span(int r) const {
  const auto c = static_cast<std::size_t>(cols());
  return std::span<const Real>(data_).subspan(static_cast<std::size_t>(r) * c, c);
}

std::span<Real> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), Real{0});
  return grad_;
}

void Tensor::zero_grad() {
  if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), Real{0});
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out(std::move(shape), data_);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.storage() == b.storage();
}

}  // namespace v2st::inline V2ST_REAL_NS
