#pragma once

#include <cstddef>
#include <functional>

#include "e2bows/tensor.hpp"

namespace e2bows {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  double analytic = 0.0;  // analytic gradient at the worst coordinate
  double numeric = 0.0;   // central difference at the worst coordinate
};

// Compares an analytic gradient against central differences of f at x,
// coordinate by coordinate. Relative error per coordinate uses the
// denominator max(|analytic|, |numeric|, 1e-8) so exact zeros do not blow up.
// Throws NumericError if f returns a non-finite value at any probe point.
GradCheckReport finite_diff_check(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, const Tensor& analytic_grad,
                                  double eps);

}  // namespace e2bows
