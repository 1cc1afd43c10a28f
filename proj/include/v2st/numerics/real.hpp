#pragma once

// Scalar type selection.
//
// The library is built twice: once in single precision (the production build)
// and once in double precision, used only where finite-difference gradient
// checks need more than float32 resolution. Every declaration lives in an
// inline namespace named after the precision so both builds can be linked into
// one binary without symbol clashes.

#if defined(V2ST_DOUBLE_PRECISION)
#define V2ST_REAL_NS f64
#else
#define V2ST_REAL_NS f32
#endif

namespace v2st::inline V2ST_REAL_NS {

#if defined(V2ST_DOUBLE_PRECISION)
using Real = double;
#else
using Real = float;
#endif

}  // namespace v2st::inline V2ST_REAL_NS
