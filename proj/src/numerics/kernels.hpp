#pragma once

#include <cstddef>
#include <vector>

#include "v2st/numerics/real.hpp"

// Plain loops ordered so the innermost index is contiguous. Each output row is
// accumulated independently and in a fixed order, so a row's result does not
// depend on how many other rows are computed alongside it.
namespace v2st::inline V2ST_REAL_NS::kernels {

// c[m,n] += a[m,k] * b[k,n]
inline void gemm_nn(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    Real* ci = c + static_cast<std::size_t>(i) * n;
    const Real* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const Real s = ai[p];
      if (s == Real{0}) continue;
      const Real* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// c[m,n] += a[k,m]^T * b[k,n]
inline void gemm_tn(const Real* a, const Real* b, Real* c, int k, int m, int n) {
  for (int p = 0; p < k; ++p) {
    const Real* ap = a + static_cast<std::size_t>(p) * m;
    const Real* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const Real s = ap[i];
      if (s == Real{0}) continue;
      Real* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

inline std::vector<Real> transposed(const Real* a, int rows, int cols) {
  std::vector<Real> t(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t[static_cast<std::size_t>(c) * rows + r] = a[static_cast<std::size_t>(r) * cols + c];
  return t;
}

// c[m,n] += a[m,k] * b[n,k]^T
inline void gemm_nt(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  const std::vector<Real> bt = transposed(b, n, k);
  gemm_nn(a, bt.data(), c, m, k, n);
}

}  // namespace v2st::inline V2ST_REAL_NS::kernels
