#include "robustcov/scale.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace robustcov {

double huber(double x, double h) { return std::min(h, std::max(-h, x)); }

Vector mahalanobis_radii(const DataMatrix& x, const Vector& mu,
                         const Matrix& v_s) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (mu.size() != d)
    throw std::invalid_argument("mahalanobis_radii: location dimension mismatch");
  if (v_s.rows() != d || v_s.cols() != d)
    throw std::invalid_argument("mahalanobis_radii: v_s has wrong shape");

  Vector radii(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector row = x.row(i).transpose() - mu;
    const double q = row.dot(v_s * row);
    if (q < 0.0)
      throw std::runtime_error(
          "mahalanobis_radii: negative quadratic form; v_s is not PSD");
    radii(i) = q / static_cast<double>(d);
  }
  return radii;
}

HuberScale huber_scale(const Vector& radii, double h) {
  const Eigen::Index n = radii.size();
  if (n < 1) throw std::invalid_argument("huber_scale: need n >= 1");
  if (!(h > 0.0)) throw std::invalid_argument("huber_scale: h must be positive");

  auto equation = [&](double theta) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += huber(radii(i) - theta, h);
    return sum;
  };

  // The estimating equation is continuous, piecewise linear and
  // nonincreasing, equal to +nh left of all breakpoints and -nh right of
  // them, so its root set lies between the extreme breakpoints r_i +- h.
  std::vector<double> breaks;
  breaks.reserve(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    breaks.push_back(radii(i) - h);
    breaks.push_back(radii(i) + h);
  }
  std::sort(breaks.begin(), breaks.end());

  HuberScale out;
  out.h = h;
  out.radii = radii;

  double prev_theta = breaks.front();
  double prev_val = equation(prev_theta);
  if (prev_val <= 0.0) {
    // Root at or before the first breakpoint; only possible at equality.
    out.theta_hat = prev_theta;
    return out;
  }
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const double theta = breaks[k];
    const double val = equation(theta);
    if (val > 0.0) {
      prev_theta = theta;
      prev_val = val;
      continue;
    }
    if (val < 0.0) {
      // Unique crossing inside (prev_theta, theta].
      out.theta_hat =
          prev_theta + prev_val * (theta - prev_theta) / (prev_val - val);
      return out;
    }
    // val == 0: the root set starts here; it extends along breakpoints while
    // the equation stays exactly zero.
    double lo = theta, hi = theta;
    for (std::size_t l = k + 1; l < breaks.size(); ++l) {
      if (equation(breaks[l]) == 0.0)
        hi = breaks[l];
      else
        break;
    }
    out.theta_hat = 0.5 * (lo + hi);
    return out;
  }
  // Fell through: all values positive cannot happen for h > 0.
  out.theta_hat = breaks.back();
  return out;
}

double default_h(int n, double epsilon, double c) {
  if (n < 1) throw std::invalid_argument("default_h: need n >= 1");
  if (!(epsilon > 0.0 && epsilon <= 2.0))
    throw std::invalid_argument("default_h: epsilon must be in (0, 2]");
  if (!(c > 0.0)) throw std::invalid_argument("default_h: c must be positive");
  return c * std::pow(static_cast<double>(n), 2.0 / (2.0 + epsilon));
}

Matrix covariance_from_scatter(const Matrix& scatter, const HuberScale& theta) {
  if (theta.theta_hat < 0.0)
    throw std::invalid_argument("covariance_from_scatter: negative scale");
  return theta.theta_hat * scatter;
}

Matrix covariance_from_scatter(const ScatterEstimate& scatter,
                               const HuberScale& theta) {
  return covariance_from_scatter(scatter.matrix, theta);
}

}  // namespace robustcov
