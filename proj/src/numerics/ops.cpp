#include "v2st/numerics/ops.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"
#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS::ops {

namespace {

using detail::Node;

Real* grad_of(Node& n) { return n.requires_grad ? n.value.grad().data() : nullptr; }

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor like(const Var& a) { return Tensor::matrix(a.rows(), a.cols()); }

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor out = like(a);
  const Real* x = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return Var::make(std::move(out), {a}, [deriv](Node& self) {
    Node& pa = *self.parents[0];
    Real* ga = grad_of(pa);
    if (!ga) return;
    const Real* g = self.value.grad().data();
    const Real* x = pa.value.data();
    const Real* y = self.value.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::matrix(m, n);
  kernels::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return Var::make(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Real* g = self.value.grad().data();
    if (Real* ga = grad_of(pa)) kernels::gemm_nt(g, pb.value.data(), ga, m, n, k);
    if (Real* gb = grad_of(pb)) kernels::gemm_tn(pa.value.data(), g, gb, m, k, n);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  }
  Tensor out = Tensor::matrix(m, n);
  kernels::gemm_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
  return Var::make(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Real* g = self.value.grad().data();
    if (Real* ga = grad_of(pa)) kernels::gemm_nn(g, pb.value.data(), ga, m, n, k);
    if (Real* gb = grad_of(pb)) kernels::gemm_tn(g, pa.value.data(), gb, m, n, k);
  });
}

Var transpose(const Var& a) {
  const int r = a.rows(), c = a.cols();
  Tensor out({c, r}, kernels::transposed(a.value().data(), r, c));
  return Var::make(std::move(out), {a}, [r, c](Node& self) {
    Node& pa = *self.parents[0];
    Real* ga = grad_of(pa);
    if (!ga) return;
    const Real* g = self.value.grad().data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ga[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j) * r + i];
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    const Real* g = self.value.grad().data();
    for (int p = 0; p < 2; ++p) {
      if (Real* gp = grad_of(*self.parents[static_cast<std::size_t>(p)])) {
        for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += g[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    const Real* g = self.value.grad().data();
    if (Real* ga = grad_of(*self.parents[0]))
      for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i];
    if (Real* gb = grad_of(*self.parents[1]))
      for (std::size_t i = 0; i < self.value.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::make(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Real* g = self.value.grad().data();
    if (Real* ga = grad_of(pa))
      for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i] * pb.value[i];
    if (Real* gb = grad_of(pb))
      for (std::size_t i = 0; i < self.value.size(); ++i) gb[i] += g[i] * pa.value[i];
  });
}

Var scale(const Var& a, Real factor) {
  return unary(
      a, [factor](Real x) { return x * factor; }, [factor](Real, Real) { return factor; });
}

Var add_scalar(const Var& a, Real value) {
  return unary(
      a, [value](Real x) { return x + value; }, [](Real, Real) { return Real{1}; });
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw ShapeError("mul_scalar: scale must be [1,1], got " + shape_str(s.shape()));
  const Real factor = s.value()[0];
  Tensor out = like(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return Var::make(std::move(out), {a, s}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& ps = *self.parents[1];
    const Real* g = self.value.grad().data();
    const Real factor = ps.value[0];
    if (Real* ga = grad_of(pa))
      for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i] * factor;
    if (Real* gs = grad_of(ps)) {
      Real acc = 0;
      for (std::size_t i = 0; i < self.value.size(); ++i) acc += g[i] * pa.value[i];
      gs[0] += acc;
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  const int m = a.rows(), n = a.cols();
  if (row.value().size() != static_cast<std::size_t>(n)) {
    throw ShapeError("add_row: row of shape " + shape_str(row.shape()) + " does not broadcast over " +
                     shape_str(a.shape()));
  }
  Tensor out = like(a);
  const Real* r = row.value().data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = a.value().at(i, j) + r[j];
  return Var::make(std::move(out), {a, row}, [m, n](Node& self) {
    const Real* g = self.value.grad().data();
    if (Real* ga = grad_of(*self.parents[0]))
      for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i];
    if (Real* gr = grad_of(*self.parents[1]))
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) gr[j] += g[static_cast<std::size_t>(i) * n + j];
  });
}

Var gelu(const Var& a) {
  // tanh approximation
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      a,
      [](Real x) {
        const double xd = x;
        return static_cast<Real>(0.5 * xd * (1.0 + std::tanh(kC * (xd + kA * xd * xd * xd))));
      },
      [](Real x, Real) {
        const double xd = x;
        const double u = kC * (xd + kA * xd * xd * xd);
        const double t = std::tanh(u);
        const double du = kC * (1.0 + 3.0 * kA * xd * xd);
        return static_cast<Real>(0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du);
      });
}

Var silu(const Var& a) {
  return unary(
      a, [](Real x) { return x / (Real{1} + std::exp(-x)); },
      [](Real x, Real) {
        const Real s = Real{1} / (Real{1} + std::exp(-x));
        return s * (Real{1} + x * (Real{1} - s));
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real{1} - y * y; });
}

Var exp(const Var& a) {
  return unary(
      a, [](Real x) { return std::exp(x); }, [](Real, Real y) { return y; });
}

Var square(const Var& a) {
  return unary(
      a, [](Real x) { return x * x; }, [](Real x, Real) { return Real{2} * x; });
}

Var sum(const Var& a) {
  Real acc = 0;
  for (Real v : a.value().values()) acc += v;
  return Var::make(Tensor::scalar(acc), {a}, [](Node& self) {
    Node& pa = *self.parents[0];
    Real* ga = grad_of(pa);
    if (!ga) return;
    const Real g = self.value.grad()[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) ga[i] += g;
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<Real>(a.value().size());
  return scale(sum(a), Real{1} / n);
}

Var mean_rows(const Var& a) {
  const int m = a.rows(), n = a.cols();
  if (m == 0) throw ShapeError("mean_rows: no rows");
  Tensor out = Tensor::matrix(1, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] += a.value().at(i, j);
  const Real inv = Real{1} / static_cast<Real>(m);
  for (auto& v : out.values()) v *= inv;
  return Var::make(std::move(out), {a}, [m, n, inv](Node& self) {
    Real* ga = grad_of(*self.parents[0]);
    if (!ga) return;
    const Real* g = self.value.grad().data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga[static_cast<std::size_t>(i) * n + j] += g[j] * inv;
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  const int n = parts.front().cols();
  int m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
    m += p.rows();
  }
  Tensor out = Tensor::matrix(m, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  return Var::make(std::move(out), parts, [](Node& self) {
    const Real* g = self.value.grad().data();
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t len = p->value.size();
      if (Real* gp = grad_of(*p))
        for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
      off += len;
    }
  });
}

Var slice_rows(const Var& a, int begin, int end) {
  const int n = a.cols();
  if (begin < 0 || end > a.rows() || begin > end) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                     shape_str(a.shape()));
  }
  const auto off = static_cast<std::size_t>(begin) * n;
  const auto len = static_cast<std::size_t>(end - begin) * n;
  Tensor out = Tensor::matrix(end - begin, n);
  std::copy_n(a.value().data() + off, len, out.data());
  return Var::make(std::move(out), {a}, [off, len](Node& self) {
    Real* ga = grad_of(*self.parents[0]);
    if (!ga) return;
    const Real* g = self.value.grad().data();
    for (std::size_t i = 0; i < len; ++i) ga[off + i] += g[i];
  });
}

Var slice_cols(const Var& a, int begin, int end) {
  const int m = a.rows(), n = a.cols();
  if (begin < 0 || end > n || begin > end) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                     shape_str(a.shape()));
  }
  const int w = end - begin;
  Tensor out = Tensor::matrix(m, w);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = a.value().at(i, begin + j);
  return Var::make(std::move(out), {a}, [m, n, w, begin](Node& self) {
    Real* ga = grad_of(*self.parents[0]);
    if (!ga) return;
    const Real* g = self.value.grad().data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j) ga[static_cast<std::size_t>(i) * n + begin + j] += g[static_cast<std::size_t>(i) * w + j];
  });
}

Var repeat_row(const Var& row, int times) {
  if (row.rows() != 1) throw ShapeError("repeat_row: expected one row, got " + shape_str(row.shape()));
  const int n = row.cols();
  Tensor out = Tensor::matrix(times, n);
  for (int i = 0; i < times; ++i) std::copy_n(row.value().data(), n, out.data() + static_cast<std::size_t>(i) * n);
  return Var::make(std::move(out), {row}, [times, n](Node& self) {
    Real* gr = grad_of(*self.parents[0]);
    if (!gr) return;
    const Real* g = self.value.grad().data();
    for (int i = 0; i < times; ++i)
      for (int j = 0; j < n; ++j) gr[j] += g[static_cast<std::size_t>(i) * n + j];
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  const int vocab = table.rows(), n = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  for (int id : idx) {
    if (id < 0 || id >= vocab) {
      throw IndexError("gather_rows: id " + std::to_string(id) + " outside table of " + std::to_string(vocab) + " rows");
    }
  }
  const int m = static_cast<int>(idx.size());
  Tensor out = Tensor::matrix(m, n);
  for (int i = 0; i < m; ++i)
    std::copy_n(table.value().data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * n, n,
                out.data() + static_cast<std::size_t>(i) * n);
  return Var::make(std::move(out), {table}, [idx = std::move(idx), n](Node& self) {
    Real* gt = grad_of(*self.parents[0]);
    if (!gt) return;
    const Real* g = self.value.grad().data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Real* row = gt + static_cast<std::size_t>(idx[i]) * n;
      for (int j = 0; j < n; ++j) row[j] += g[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    }
  });
}

Var rms_norm(const Var& x, const Var& gain, Real eps) {
  const int m = x.rows(), n = x.cols();
  if (gain.value().size() != static_cast<std::size_t>(n)) {
    throw ShapeError("rms_norm: gain " + shape_str(gain.shape()) + " vs input " + shape_str(x.shape()));
  }
  Tensor out = like(x);
  std::vector<Real> inv_rms(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Real ss = 0;
    for (int j = 0; j < n; ++j) ss += x.value().at(i, j) * x.value().at(i, j);
    const Real r = Real{1} / std::sqrt(ss / static_cast<Real>(n) + eps);
    inv_rms[static_cast<std::size_t>(i)] = r;
    for (int j = 0; j < n; ++j) out.at(i, j) = x.value().at(i, j) * r * gain.value()[static_cast<std::size_t>(j)];
  }
  return Var::make(std::move(out), {x, gain}, [m, n, inv_rms = std::move(inv_rms)](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    const Real* g = self.value.grad().data();
    Real* gx = grad_of(px);
    Real* gg = grad_of(pg);
    for (int i = 0; i < m; ++i) {
      const Real r = inv_rms[static_cast<std::size_t>(i)];
      const Real* xi = px.value.data() + static_cast<std::size_t>(i) * n;
      const Real* gi = g + static_cast<std::size_t>(i) * n;
      if (gg)
        for (int j = 0; j < n; ++j) gg[j] += gi[j] * xi[j] * r;
      if (gx) {
        // dy_j/dx_k = g_j r (delta_jk - x_j x_k r^2 / n)
        Real dot = 0;
        for (int j = 0; j < n; ++j) dot += gi[j] * pg.value[static_cast<std::size_t>(j)] * xi[j];
        const Real c = dot * r * r * r / static_cast<Real>(n);
        Real* gxi = gx + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) gxi[k] += gi[k] * pg.value[static_cast<std::size_t>(k)] * r - xi[k] * c;
      }
    }
  });
}

Var l2_normalize_rows(const Var& x, Real eps) {
  const int m = x.rows(), n = x.cols();
  Tensor out = like(x);
  std::vector<Real> inv_norm(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Real ss = 0;
    for (int j = 0; j < n; ++j) ss += x.value().at(i, j) * x.value().at(i, j);
    const Real r = Real{1} / std::max(std::sqrt(ss), eps);
    inv_norm[static_cast<std::size_t>(i)] = r;
    for (int j = 0; j < n; ++j) out.at(i, j) = x.value().at(i, j) * r;
  }
  return Var::make(std::move(out), {x}, [m, n, inv_norm = std::move(inv_norm)](Node& self) {
    Real* gx = grad_of(*self.parents[0]);
    if (!gx) return;
    const Real* g = self.value.grad().data();
    const Real* y = self.value.data();
    for (int i = 0; i < m; ++i) {
      const Real r = inv_norm[static_cast<std::size_t>(i)];
      const Real* gi = g + static_cast<std::size_t>(i) * n;
      const Real* yi = y + static_cast<std::size_t>(i) * n;
      Real dot = 0;
      for (int j = 0; j < n; ++j) dot += gi[j] * yi[j];
      Real* gxi = gx + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) gxi[j] += r * (gi[j] - yi[j] * dot);
    }
  });
}

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

}  // namespace v2st::inline V2ST_REAL_NS::ops
