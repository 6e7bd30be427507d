// Scalar-vs-AVX2 backend equivalence. Elementwise kernels must match the
// scalar reference bit-for-bit (identical per-lane operations, no
// contraction); reduction kernels accumulate in a different order, so they
// are compared at tight relative tolerance.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ycvt/kernels.hpp"
#include "ycvt/rng.hpp"

using namespace ycvt;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
}

const kernels::Kernels* simd() { return kernels::avx2_backend(); }

}  // namespace

TEST_CASE("dispatch falls back to scalar and reports a backend") {
  const auto& k = kernels::active();
  CHECK((std::string(k.name) == "scalar" || std::string(k.name) == "avx2"));
}

TEST_CASE("elementwise kernels are bit-identical across backends") {
  if (simd() == nullptr) return;  // nothing to compare on this host
  Rng rng(11);
  const auto& sc = kernels::scalar_backend();
  const auto& vx = *simd();
  for (size_t n : {1u, 3u, 4u, 7u, 8u, 33u, 128u, 1001u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<double> o1(n), o2(n);

    sc.vadd(o1.data(), a.data(), b.data(), n);
    vx.vadd(o2.data(), a.data(), b.data(), n);
    CHECK(o1 == o2);

    sc.vsub(o1.data(), a.data(), b.data(), n);
    vx.vsub(o2.data(), a.data(), b.data(), n);
    CHECK(o1 == o2);

    sc.vmul(o1.data(), a.data(), b.data(), n);
    vx.vmul(o2.data(), a.data(), b.data(), n);
    CHECK(o1 == o2);

    sc.vscale(o1.data(), a.data(), 1.7, n);
    vx.vscale(o2.data(), a.data(), 1.7, n);
    CHECK(o1 == o2);
  }
}

TEST_CASE("adam update is bit-identical across backends") {
  if (simd() == nullptr) return;
  Rng rng(12);
  for (size_t n : {1u, 5u, 8u, 67u, 513u}) {
    auto g = random_vec(rng, n);
    auto p1 = random_vec(rng, n), m1 = random_vec(rng, n, 0.0, 0.1),
         v1 = random_vec(rng, n, 0.0, 0.1);
    auto p2 = p1, m2 = m1, v2 = v1;
    kernels::scalar_backend().adam_update(p1.data(), g.data(), m1.data(), v1.data(), n,
                                          2.5e-4, 0.9, 0.999, 1e-8, 0.1, 0.001, 0.01);
    simd()->adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 2.5e-4, 0.9,
                        0.999, 1e-8, 0.1, 0.001, 0.01);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }
}

TEST_CASE("reduction kernels match to tight relative tolerance") {
  if (simd() == nullptr) return;
  Rng rng(13);
  const auto& sc = kernels::scalar_backend();
  const auto& vx = *simd();
  for (size_t n : {1u, 2u, 4u, 9u, 31u, 255u, 2048u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    CHECK(close_rel(sc.dot(a.data(), b.data(), n), vx.dot(a.data(), b.data(), n), 1e-12));
    CHECK(close_rel(sc.vsum(a.data(), n), vx.vsum(a.data(), n), 1e-12));
    CHECK(sc.vmax(a.data(), n) == vx.vmax(a.data(), n));

    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    sc.axpy(y1.data(), 0.37, a.data(), n);
    vx.axpy(y2.data(), 0.37, a.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-14));
  }
}

TEST_CASE("gemm variants match across backends") {
  if (simd() == nullptr) return;
  Rng rng(14);
  const auto& sc = kernels::scalar_backend();
  const auto& vx = *simd();
  const size_t dims[][3] = {{1, 1, 1}, {2, 3, 4}, {5, 7, 9}, {8, 8, 8},
                            {13, 17, 19}, {32, 48, 31}, {64, 16, 100}};
  for (const auto& d : dims) {
    const size_t m = d[0], k = d[1], n = d[2];
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    auto g = random_vec(rng, m * n);

    std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
    sc.gemm_nn(m, k, n, a.data(), b.data(), c1.data());
    vx.gemm_nn(m, k, n, a.data(), b.data(), c2.data());
    for (size_t i = 0; i < c1.size(); ++i) CHECK(close_rel(c1[i], c2[i], 1e-12));

    std::vector<double> t1(k * n, 0.0), t2(k * n, 0.0);
    sc.gemm_tn(m, k, n, a.data(), g.data(), t1.data());
    vx.gemm_tn(m, k, n, a.data(), g.data(), t2.data());
    for (size_t i = 0; i < t1.size(); ++i) CHECK(close_rel(t1[i], t2[i], 1e-12));

    std::vector<double> u1(m * k, 0.0), u2(m * k, 0.0);
    sc.gemm_nt(m, k, n, g.data(), b.data(), u1.data());
    vx.gemm_nt(m, k, n, g.data(), b.data(), u2.data());
    for (size_t i = 0; i < u1.size(); ++i) CHECK(close_rel(u1[i], u2[i], 1e-12));
  }
}

TEST_CASE("gemm_nn reference computes the plain triple loop") {
  // Independent check of the reference itself on a hand example.
  const double a[4] = {1, 2, 3, 4};   // [[1,2],[3,4]]
  const double b[2] = {1, 1};         // [[1],[1]]
  double c[2] = {0, 0};
  kernels::scalar_backend().gemm_nn(2, 2, 1, a, b, c);
  CHECK(c[0] == 3.0);
  CHECK(c[1] == 7.0);
}
