#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace robustcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observation matrix with one sample per row (n x d).
using DataMatrix = Eigen::MatrixXd;

/// Thrown by iterative solvers that hit their iteration cap. Carries the
/// best iterate found so the caller can inspect or reuse it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Matrix best, double residual)
      : std::runtime_error(what),
        best_iterate(std::move(best)),
        residual(residual) {}

  Matrix best_iterate;
  double residual;
};

}  // namespace robustcov
