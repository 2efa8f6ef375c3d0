#pragma once

// Brute-force minimizer of the spatial-median objective by iterative grid
// refinement, independent of the Weiszfeld implementation. Two-dimensional
// data only. Test-only code.

#include <Eigen/Dense>

namespace test_support {

inline double sum_of_distances(const Eigen::MatrixXd& x,
                               const Eigen::Vector2d& mu) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    total += (x.row(i).transpose() - mu).norm();
  return total;
}

inline Eigen::Vector2d grid_minimize(const Eigen::MatrixXd& x,
                                     int levels = 40) {
  double lo0 = x.col(0).minCoeff(), hi0 = x.col(0).maxCoeff();
  double lo1 = x.col(1).minCoeff(), hi1 = x.col(1).maxCoeff();
  const int cells = 24;
  Eigen::Vector2d best(0.5 * (lo0 + hi0), 0.5 * (lo1 + hi1));

  for (int level = 0; level < levels; ++level) {
    double best_val = std::numeric_limits<double>::infinity();
    Eigen::Vector2d arg = best;
    const double step0 = (hi0 - lo0) / cells;
    const double step1 = (hi1 - lo1) / cells;
    for (int i = 0; i <= cells; ++i) {
      for (int j = 0; j <= cells; ++j) {
        Eigen::Vector2d candidate(lo0 + step0 * i, lo1 + step1 * j);
        const double val = sum_of_distances(x, candidate);
        if (val < best_val) {
          best_val = val;
          arg = candidate;
        }
      }
    }
    best = arg;
    // Shrink the box around the winning cell; the objective is convex, so
    // the minimizer stays inside a one-cell margin.
    lo0 = arg(0) - 2.0 * step0;
    hi0 = arg(0) + 2.0 * step0;
    lo1 = arg(1) - 2.0 * step1;
    hi1 = arg(1) + 2.0 * step1;
    if (step0 < 1e-14 && step1 < 1e-14) break;
  }
  return best;
}

}  // namespace test_support
