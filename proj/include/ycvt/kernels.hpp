#pragma once

// Data-parallel inner-loop kernels. Every arithmetic hot loop in the project
// (gemm for matmul and im2col convolution, elementwise maps, reductions, the
// Adam update) goes through the Kernels table. Two backends exist:
//
//   scalar  - the templated reference implementations below, compiled without
//             FMA contraction; also the generic path for non-double scalars.
//   avx2    - double-precision AVX2+FMA variants in kernels_avx2.cpp.
//
// The active table is picked once at startup from cpuid, overridable with
// YLDCVT_KERNELS=scalar|avx2. The backends are equivalence-tested against
// each other: elementwise kernels bit-exactly, reductions to tight relative
// tolerance (lane-split accumulation changes rounding order).

#include <cmath>
#include <cstddef>
#include <string>

namespace ycvt::kernels {

// ----------------------------------------------------------------- dispatch

struct Kernels {
  const char* name;

  // c[m,n] += a[m,k] * b[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* b, double* c);
  // c[k,n] += sum_m a[m,k] * g[m,n]   (a accessed transposed)
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n,
                  const double* a, const double* g, double* c);
  // c[m,k] += sum_n g[m,n] * b[k,n]   (b accessed transposed)
  void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t n,
                  const double* g, const double* b, double* c);

  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  void (*vadd)(double* out, const double* a, const double* b, std::size_t n);
  void (*vsub)(double* out, const double* a, const double* b, std::size_t n);
  void (*vmul)(double* out, const double* a, const double* b, std::size_t n);
  void (*vscale)(double* out, const double* a, double alpha, std::size_t n);
  double (*vsum)(const double* a, std::size_t n);
  double (*vmax)(const double* a, std::size_t n);

  // Fused Adam step with bias correction already folded into bc1/bc2.
  //   m = b1*m + (1-b1)*g ; v = b2*v + (1-b2)*g^2
  //   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps) + lr * wd * p
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2, double wd);
};

/// Backend chosen at startup (cpuid + YLDCVT_KERNELS override).
const Kernels& active();

const Kernels& scalar_backend();
/// Null when the CPU lacks AVX2/FMA.
const Kernels* avx2_backend();

/// Test hook: force a specific backend for the current process.
void force_backend(const Kernels* k);

// ------------------------------------------- templated reference kernels

template <class S>
void gemm_nn_ref(std::size_t m, std::size_t k, std::size_t n,
                 const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    S* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void gemm_tn_ref(std::size_t m, std::size_t k, std::size_t n,
                 const S* a, const S* g, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    const S* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = arow[p];
      S* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <class S>
void gemm_nt_ref(std::size_t m, std::size_t k, std::size_t n,
                 const S* g, const S* b, S* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* grow = g + i * n;
    S* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const S* brow = b + p * n;
      S acc = S(0);
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

template <class S>
S dot_ref(const S* a, const S* b, std::size_t n) {
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class S>
void axpy_ref(S* y, S alpha, const S* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
void vadd_ref(S* out, const S* a, const S* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <class S>
void vsub_ref(S* out, const S* a, const S* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <class S>
void vmul_ref(S* out, const S* a, const S* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <class S>
void vscale_ref(S* out, const S* a, S alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * alpha;
}

template <class S>
S vsum_ref(const S* a, std::size_t n) {
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

template <class S>
S vmax_ref(const S* a, std::size_t n) {
  S best = a[0];
  for (std::size_t i = 1; i < n; ++i)
    if (a[i] > best) best = a[i];
  return best;
}

template <class S>
void adam_update_ref(S* p, const S* g, S* m, S* v, std::size_t n, S lr,
                     S beta1, S beta2, S eps, S bc1, S bc2, S wd) {
  using std::sqrt;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
    const S mhat = m[i] / bc1;
    const S vhat = v[i] / bc2;
    p[i] -= lr * mhat / (sqrt(vhat) + eps) + lr * wd * p[i];
  }
}

}  // namespace ycvt::kernels
