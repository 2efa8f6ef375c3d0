#include "robustcov/location.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace robustcov {

double spatial_median_objective(const DataMatrix& x, const Vector& mu) {
  double obj = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    obj += (x.row(i).transpose() - mu).norm();
  return obj;
}

namespace {

Vector coordinatewise_median(const DataMatrix& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Vector med(d);
  std::vector<double> col(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) col[i] = x(i, j);
    std::nth_element(col.begin(), col.begin() + n / 2, col.end());
    double hi = col[n / 2];
    if (n % 2 == 0) {
      std::nth_element(col.begin(), col.begin() + n / 2 - 1, col.end());
      med(j) = 0.5 * (col[n / 2 - 1] + hi);
    } else {
      med(j) = hi;
    }
  }
  return med;
}

}  // namespace

LocationEstimate spatial_median(const DataMatrix& x, double tol,
                                int max_iter) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n < 1 || d < 1)
    throw std::invalid_argument("spatial_median: empty data matrix");
  if (tol <= 0.0) throw std::invalid_argument("spatial_median: tol must be > 0");

  LocationEstimate est;
  if (n == 1) {
    est.mu_hat = x.row(0).transpose();
    return est;
  }

  Vector mu = coordinatewise_median(x);
  const double data_scale =
      std::max(1.0, x.rowwise().norm().maxCoeff());

  for (int iter = 1; iter <= max_iter; ++iter) {
    // One Weiszfeld step. Rows coinciding with the current iterate are
    // pulled out and handled by the Vardi-Zhang rule.
    Vector weighted_sum = Vector::Zero(d);
    double weight_total = 0.0;
    Vector pull = Vector::Zero(d);  // unit directions toward non-anchor rows
    int anchors = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector diff = x.row(i).transpose() - mu;
      const double dist = diff.norm();
      if (dist <= 1e-12 * data_scale) {
        ++anchors;
        continue;
      }
      const double w = 1.0 / dist;
      weighted_sum += w * x.row(i).transpose();
      weight_total += w;
      pull += diff * w;  // unit direction toward row i
    }

    if (anchors == n) {
      // All rows equal; mu is already the minimizer.
      est.mu_hat = mu;
      est.iterations = iter;
      est.final_step_norm = 0.0;
      return est;
    }

    Vector target = weighted_sum / weight_total;
    Vector next;
    if (anchors > 0) {
      const double r_norm = pull.norm();
      if (r_norm <= static_cast<double>(anchors)) {
        // Subgradient condition: the anchor point is the minimizer.
        est.mu_hat = mu;
        est.iterations = iter;
        est.final_step_norm = 0.0;
        return est;
      }
      const double shrink = std::min(1.0, static_cast<double>(anchors) / r_norm);
      next = (1.0 - shrink) * target + shrink * mu;
    } else {
      next = target;
    }

    const double step = (next - mu).norm();
    const double scale = std::max(mu.norm(), data_scale);
    mu = next;
    if (step <= tol * scale) {
      est.mu_hat = mu;
      est.iterations = iter;
      est.final_step_norm = step / scale;
      return est;
    }
    est.final_step_norm = step / scale;
  }

  Matrix best(d, 1);
  best.col(0) = mu;
  throw ConvergenceError("spatial_median: no convergence after " +
                             std::to_string(max_iter) + " iterations",
                         best, est.final_step_norm);
}

}  // namespace robustcov
