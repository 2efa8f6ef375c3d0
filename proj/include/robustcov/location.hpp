#pragma once

#include "robustcov/types.hpp"

namespace robustcov {

struct LocationEstimate {
  Vector mu_hat;
  int iterations = 0;
  double final_step_norm = 0.0;
};

/// Spatial median: minimizer of sum_i ||X_i - mu||_2 over mu.
///
/// Modified Weiszfeld iteration with the Vardi-Zhang correction when an
/// iterate lands on a data row, started from the coordinatewise median.
/// Converges when the relative step norm drops below `tol` or the
/// subgradient condition certifies a data row as the minimizer. For n = 2
/// the minimizer is any point on the segment between the rows; the
/// Weiszfeld limit is returned.
LocationEstimate spatial_median(const DataMatrix& x, double tol = 1e-8,
                                int max_iter = 500);

/// Objective sum_i ||X_i - mu||_2.
double spatial_median_objective(const DataMatrix& x, const Vector& mu);

}  // namespace robustcov
