#pragma once

// Finite-difference gradient verification. Analytic gradients from the
// autograd engine are compared entrywise against central differences
// (f(x+eps) - f(x-eps)) / (2 eps) of an independent plain-forward evaluation.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
//
// Near-zero gradient entries sit below what a double-precision central
// difference can resolve (the difference of two ~O(1) evaluations carries
// rounding noise around 1e-12 regardless of the true derivative), so entries
// that trip the tolerance while both sides are tiny are re-measured with the
// same formula and the same eps at long double precision when the caller
// supplies an extended-precision evaluation.

#include <functional>
#include <string>
#include <vector>

#include "ycvt/nd.hpp"
#include "ycvt/tensor.hpp"

namespace ycvt {

using AutogradFn = std::function<Tensor(const std::vector<Tensor>&)>;
using PlainFn = std::function<double(const std::vector<NdArray>&)>;
using PlainFnLD = std::function<long double(const std::vector<NdArrayLD>&)>;

struct GradCheckOptions {
  double eps = 1e-5;        // central-difference step; keep within [1e-6, 1e-4]
  double tolerance = 1e-4;  // refinement trigger; large errors are returned, not thrown
  // Negative-control hook: scales the analytic gradient of one input.
  int corrupt_input = -1;
  double corrupt_scale = 1.0;
  // Entries with rel > tolerance/4 and magnitudes under this band are
  // re-measured at long double; larger disagreements are genuine.
  double refine_band = 1e-4;
  int64_t max_refinements = 20000;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_input = -1;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t refined = 0;
  int64_t entries = 0;
  std::vector<double> per_input_max;
};

/// fn builds the scalar loss through the autograd graph; plain evaluates the
/// same function without a graph; plain_ld (optional) at long double.
GradCheckResult grad_check(const AutogradFn& fn, const PlainFn& plain,
                           const PlainFnLD& plain_ld,
                           const std::vector<NdArray>& inputs,
                           const GradCheckOptions& opts = {});

}  // namespace ycvt
