#include "ycvt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ycvt {

GradCheckResult grad_check(const AutogradFn& fn, const PlainFn& plain,
                           const PlainFnLD& plain_ld,
                           const std::vector<NdArray>& inputs,
                           const GradCheckOptions& opts) {
  // Analytic gradients through the recorded graph.
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const NdArray& a : inputs) leaves.emplace_back(a, /*requires_grad=*/true);
  Tensor loss = fn(leaves);
  if (loss.numel() != 1)
    throw ShapeError(cat("grad_check function must return a scalar, got ",
                         shape_str(loss.shape())));
  autograd::backward(loss);

  std::vector<NdArray> analytic;
  analytic.reserve(leaves.size());
  for (size_t i = 0; i < leaves.size(); ++i) {
    NdArray g = leaves[i].has_grad() ? leaves[i].grad() : NdArray(inputs[i].shape);
    if (static_cast<int>(i) == opts.corrupt_input)
      for (auto& v : g.data) v *= opts.corrupt_scale;
    analytic.push_back(std::move(g));
  }

  // Central differences over a mutable copy; each probed entry is restored.
  std::vector<NdArray> probe = inputs;
  std::vector<NdArrayLD> probe_ld;
  if (plain_ld) {
    probe_ld.reserve(inputs.size());
    for (const NdArray& a : inputs) probe_ld.push_back(a.cast<long double>());
  }

  GradCheckResult res;
  res.per_input_max.assign(inputs.size(), 0.0);
  const double eps = opts.eps;
  const double floor = 1e-8;

  for (size_t t = 0; t < inputs.size(); ++t) {
    for (int64_t i = 0; i < inputs[t].numel(); ++i) {
      const size_t ii = static_cast<size_t>(i);
      const double x0 = inputs[t].data[ii];
      probe[t].data[ii] = x0 + eps;
      const double fp = plain(probe);
      probe[t].data[ii] = x0 - eps;
      const double fm = plain(probe);
      probe[t].data[ii] = x0;

      const double a = analytic[t].data[ii];
      double n = (fp - fm) / (2.0 * eps);
      double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});

      // Re-measure borderline tiny entries at extended precision: the same
      // central difference, evaluated where double rounding noise drowns the
      // true derivative.
      if (plain_ld && rel > opts.tolerance * 0.25 &&
          std::max(std::abs(a), std::abs(n)) < opts.refine_band &&
          res.refined < opts.max_refinements) {
        const long double x0l = probe_ld[t].data[ii];
        probe_ld[t].data[ii] = x0l + static_cast<long double>(eps);
        const long double fpl = plain_ld(probe_ld);
        probe_ld[t].data[ii] = x0l - static_cast<long double>(eps);
        const long double fml = plain_ld(probe_ld);
        probe_ld[t].data[ii] = x0l;
        n = static_cast<double>((fpl - fml) / (2.0L * static_cast<long double>(eps)));
        rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
        res.refined++;
      }

      res.entries++;
      res.per_input_max[t] = std::max(res.per_input_max[t], rel);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_input = static_cast<int>(t);
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = n;
      }
    }
  }
  return res;
}

}  // namespace ycvt
