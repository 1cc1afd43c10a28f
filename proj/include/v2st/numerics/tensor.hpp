#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "v2st/numerics/real.hpp"

namespace v2st::inline V2ST_REAL_NS {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor with an optional gradient buffer of the same shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor matrix(int rows, int cols, Real fill = Real{0});
  static Tensor row(std::vector<Real> values);
  static Tensor scalar(Real value);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  // Matrix view: a rank-1 tensor of n elements is treated as [1, n].
  int rows() const { return shape_.size() < 2 ? 1 : shape_[0]; }
  int cols() const {
    if (shape_.empty()) return 1;
    if (shape_.size() == 1) return shape_[0];
    return static_cast<int>(data_.size() / static_cast<std::size_t>(shape_[0] > 1 ? shape_[0] : 1));
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(int r, int c) { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  Real at(int r, int c) const { return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
  std::span<Real> row_span(int r);
  std::span<const Real> row_span(int r) const;

  bool has_grad() const { return !grad_.empty(); }
  // Allocates a zero gradient on first use.
  std::span<Real> grad();
  std::span<const Real> grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  void fill(Real value);

 private:
  Shape shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
};

bool same_values(const Tensor& a, const Tensor& b);

}  // namespace v2st::inline V2ST_REAL_NS
