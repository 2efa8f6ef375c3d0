#include "robustcov/poet.hpp"

#include <cmath>
#include <stdexcept>

namespace robustcov {

void ThresholdRule::validate() const {
  if (kind == Kind::Scad && !(scad_a > 2.0))
    throw std::invalid_argument("ThresholdRule: SCAD needs a > 2");
  if (kind == Kind::AdaptiveLasso && !(alasso_eta >= 1.0))
    throw std::invalid_argument("ThresholdRule: adaptive lasso needs eta >= 1");
}

double threshold_value(double x, double tau, const ThresholdRule& rule) {
  if (tau < 0.0) throw std::invalid_argument("threshold_value: tau < 0");
  rule.validate();
  const double ax = std::abs(x);
  switch (rule.kind) {
    case ThresholdRule::Kind::Hard:
      return ax >= tau ? x : 0.0;
    case ThresholdRule::Kind::Soft:
      return ax > tau ? std::copysign(ax - tau, x) : 0.0;
    case ThresholdRule::Kind::Scad: {
      const double a = rule.scad_a;
      if (ax <= 2.0 * tau) return ax > tau ? std::copysign(ax - tau, x) : 0.0;
      if (ax <= a * tau)
        return ((a - 1.0) * x - std::copysign(a * tau, x)) / (a - 2.0);
      return x;
    }
    case ThresholdRule::Kind::AdaptiveLasso: {
      if (ax <= tau) return 0.0;
      const double shrink = 1.0 - std::pow(tau / ax, rule.alasso_eta);
      return shrink > 0.0 ? x * shrink : 0.0;
    }
  }
  throw std::logic_error("threshold_value: unknown rule");
}

double w_n(int n, int d) {
  if (n < 2 || d < 2) throw std::invalid_argument("w_n: need n >= 2 and d >= 2");
  const double nn = static_cast<double>(n);
  return std::sqrt(std::log(static_cast<double>(d)) / nn) +
         std::sqrt(std::log(nn) / nn);
}

double threshold_level(int n, int d, double c) {
  if (c < 0.0) throw std::invalid_argument("threshold_level: C < 0");
  return c * w_n(n, d);
}

Matrix clip_eigenvalues(const Matrix& m, double floor) {
  Eigendecomposition eig = eigendecompose(m);
  Vector clipped = eig.values.cwiseMax(floor);
  return eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
}

Matrix pd_repair(const Matrix& m, double repair_floor_scale) {
  const double floor =
      repair_floor_scale * m.trace() / static_cast<double>(m.rows());
  return clip_eigenvalues(m, floor);
}

PoetEstimate poet(const Matrix& s, int m, double tau, const ThresholdRule& rule,
                  const PoetOptions& options) {
  rule.validate();
  if (tau < 0.0) throw std::invalid_argument("poet: tau < 0");
  const Eigen::Index d = s.rows();

  PoetEstimate est;
  est.rule = rule;
  est.threshold_level = tau;
  est.m = m;
  est.split = split(s, m);

  // Threshold off-diagonal residual entries; the diagonal stays untouched.
  Matrix thresholded = est.split.residual;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j)
        thresholded(i, j) = threshold_value(thresholded(i, j), tau, rule);

  if (options.pd_repair) {
    thresholded = pd_repair(thresholded, options.repair_floor_scale);
    est.repaired = true;
  }
  est.sigma_u_tau = std::move(thresholded);

  if (m == 0) {
    est.sigma_tau = est.sigma_u_tau;
  } else {
    est.sigma_tau = est.split.gamma_m * est.split.lambda_m.asDiagonal() *
                        est.split.gamma_m.transpose() +
                    est.sigma_u_tau;
  }
  return est;
}

PoetEstimate poet(const ScatterEstimate& s, int m, double tau,
                  const ThresholdRule& rule, const PoetOptions& options) {
  return poet(s.matrix, m, tau, rule, options);
}

}  // namespace robustcov
