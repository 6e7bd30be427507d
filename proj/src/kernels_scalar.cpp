#include "ycvt/kernels.hpp"

namespace ycvt::kernels {

namespace {

void gemm_nn_d(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* b, double* c) {
  gemm_nn_ref<double>(m, k, n, a, b, c);
}
void gemm_tn_d(std::size_t m, std::size_t k, std::size_t n,
               const double* a, const double* g, double* c) {
  gemm_tn_ref<double>(m, k, n, a, g, c);
}
void gemm_nt_d(std::size_t m, std::size_t k, std::size_t n,
               const double* g, const double* b, double* c) {
  gemm_nt_ref<double>(m, k, n, g, b, c);
}
double dot_d(const double* a, const double* b, std::size_t n) {
  return dot_ref<double>(a, b, n);
}
void axpy_d(double* y, double alpha, const double* x, std::size_t n) {
  axpy_ref<double>(y, alpha, x, n);
}
void vadd_d(double* out, const double* a, const double* b, std::size_t n) {
  vadd_ref<double>(out, a, b, n);
}
void vsub_d(double* out, const double* a, const double* b, std::size_t n) {
  vsub_ref<double>(out, a, b, n);
}
void vmul_d(double* out, const double* a, const double* b, std::size_t n) {
  vmul_ref<double>(out, a, b, n);
}
void vscale_d(double* out, const double* a, double alpha, std::size_t n) {
  vscale_ref<double>(out, a, alpha, n);
}
double vsum_d(const double* a, std::size_t n) { return vsum_ref<double>(a, n); }
double vmax_d(const double* a, std::size_t n) { return vmax_ref<double>(a, n); }
void adam_d(double* p, const double* g, double* m, double* v, std::size_t n,
            double lr, double b1, double b2, double eps, double bc1,
            double bc2, double wd) {
  adam_update_ref<double>(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2, wd);
}

}  // namespace

const Kernels& scalar_backend() {
  static const Kernels table = {
      "scalar", gemm_nn_d, gemm_tn_d, gemm_nt_d, dot_d,  axpy_d,  vadd_d,
      vsub_d,   vmul_d,    vscale_d,  vsum_d,    vmax_d, adam_d,
  };
  return table;
}

}  // namespace ycvt::kernels
