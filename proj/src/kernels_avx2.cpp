// AVX2+FMA double-precision kernel backend. Compiled with -mavx2 -mfma on
// x86-64; entered only after the dispatcher has confirmed cpu support.
//
// Elementwise kernels mirror the scalar reference operation-for-operation
// (mul/add, no FMA) so they stay bit-identical to it. Reduction kernels
// (gemm, dot, sum) use FMA and lane-parallel accumulators, which changes
// rounding order; the equivalence tests compare those at tight relative
// tolerance instead of bitwise.

#include "ycvt/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define YCVT_X86 1
#else
#define YCVT_X86 0
#endif

#if YCVT_X86
#include <immintrin.h>

#include <cmath>

namespace ycvt::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, shuf));
}

void gemm_nn_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4), c1);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
      }
      for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
        _mm256_storeu_pd(crow + j, c0);
      }
      const double as = arow[p];
      for (; j < n; ++j) crow[j] = std::fma(as, brow[j], crow[j]);
    }
  }
}

void gemm_tn_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* g, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      double* crow = c + p * n;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        __m256d c1 = _mm256_loadu_pd(crow + j + 4);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(grow + j), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(grow + j + 4), c1);
        _mm256_storeu_pd(crow + j, c0);
        _mm256_storeu_pd(crow + j + 4, c1);
      }
      for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(crow + j);
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(grow + j), c0);
        _mm256_storeu_pd(crow + j, c0);
      }
      const double as = arow[p];
      for (; j < n; ++j) crow[j] = std::fma(as, grow[j], crow[j]);
    }
  }
}

inline double dot_avx2_impl(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc = std::fma(a[i], b[i], acc);
  return acc;
}

void gemm_nt_avx2(std::size_t m, std::size_t k, std::size_t n,
                  const double* g, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      crow[p] += dot_avx2_impl(grow, b + p * n, n);
    }
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  return dot_avx2_impl(a, b, n);
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void vadd_avx2(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vsub_avx2(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void vmul_avx2(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vscale_avx2(double* out, const double* a, double alpha, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), av));
  for (; i < n; ++i) out[i] = a[i] * alpha;
}

double vsum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

double vmax_avx2(const double* a, std::size_t n) {
  std::size_t i = 0;
  double best = a[0];
  if (n >= 4) {
    __m256d m = _mm256_loadu_pd(a);
    for (i = 4; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(a + i));
    __m128d lo = _mm256_castpd256_pd128(m);
    __m128d hi = _mm256_extractf128_pd(m, 1);
    __m128d mx = _mm_max_pd(lo, hi);
    mx = _mm_max_sd(mx, _mm_unpackhi_pd(mx, mx));
    best = _mm_cvtsd_f64(mx);
  }
  for (; i < n; ++i)
    if (a[i] > best) best = a[i];
  return best;
}

// Mirrors adam_update_ref operation-for-operation so scalar and AVX2 stay
// bit-identical (mul/add only, no contraction).
void adam_avx2(double* p, const double* g, double* m, double* v, std::size_t n,
               double lr, double b1, double b2, double eps, double bc1,
               double bc2, double wd) {
  const __m256d b1v = _mm256_set1_pd(b1);
  const __m256d b2v = _mm256_set1_pd(b2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - b1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - b2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  const __m256d lrwd = _mm256_set1_pd(lr * wd);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_add_pd(_mm256_mul_pd(b1v, mv), _mm256_mul_pd(omb1, gv));
    vv = _mm256_add_pd(_mm256_mul_pd(b2v, vv),
                       _mm256_mul_pd(_mm256_mul_pd(omb2, gv), gv));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(mv, bc1v);
    const __m256d vhat = _mm256_div_pd(vv, bc2v);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    __m256d pv = _mm256_loadu_pd(p + i);
    const __m256d step = _mm256_add_pd(
        _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom), _mm256_mul_pd(lrwd, pv));
    pv = _mm256_sub_pd(pv, step);
    _mm256_storeu_pd(p + i, pv);
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps) + lr * wd * p[i];
  }
}

}  // namespace

const Kernels* avx2_backend() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma"))
    return nullptr;
  static const Kernels table = {
      "avx2",    gemm_nn_avx2, gemm_tn_avx2, gemm_nt_avx2, dot_avx2,
      axpy_avx2, vadd_avx2,    vsub_avx2,    vmul_avx2,    vscale_avx2,
      vsum_avx2, vmax_avx2,    adam_avx2,
  };
  return &table;
}

}  // namespace ycvt::kernels

#else  // !YCVT_X86

namespace ycvt::kernels {
const Kernels* avx2_backend() { return nullptr; }
}  // namespace ycvt::kernels

#endif
