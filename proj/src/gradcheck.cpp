#include "e2bows/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "e2bows/errors.hpp"

namespace e2bows {

namespace {
constexpr double kDenominatorFloor = 1e-8;
}

GradCheckReport finite_diff_check(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, const Tensor& analytic_grad,
                                  double eps) {
  if (eps <= 0.0) throw ArgumentError("finite_diff_check: eps must be positive");
  if (x.size() != analytic_grad.size()) {
    throw DimensionError("finite_diff_check: gradient length does not match x");
  }

  GradCheckReport report;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe.data[i];
    probe.data[i] = saved + eps;
    const double f_plus = f(probe);
    probe.data[i] = saved - eps;
    const double f_minus = f(probe);
    probe.data[i] = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw NumericError("finite_diff_check: f returned a non-finite value");
    }
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double analytic = analytic_grad.data[i];
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), kDenominatorFloor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel >= report.max_rel_error) {
      // >= so the first coordinate populates the report even when all errors
      // are exactly zero.
      const bool first = (i == 0);
      if (rel > report.max_rel_error || first) {
        report.max_rel_error = rel;
        report.worst_coordinate = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace e2bows
