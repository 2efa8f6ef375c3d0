#include "robustcov/scatter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "robustcov/norms.hpp"

namespace robustcov {

namespace {

constexpr double kRadiusFloor = 1e-14;  // relative row-exclusion threshold

struct CenteredRows {
  Matrix rows;       // kept centered rows
  int skipped = 0;
};

CenteredRows center_and_filter(const DataMatrix& x, const Vector& mu) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (mu.size() != d)
    throw std::invalid_argument("scatter: location has wrong dimension");
  Matrix centered = x.rowwise() - mu.transpose();
  Vector radii = centered.rowwise().norm();
  const double scale = radii.maxCoeff();
  if (scale <= 0.0)
    throw std::invalid_argument("scatter: all rows coincide with the center");

  CenteredRows out;
  out.rows.resize(n, d);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (radii(i) <= kRadiusFloor * scale) {
      ++out.skipped;
      continue;
    }
    out.rows.row(kept++) = centered.row(i);
  }
  out.rows.conservativeResize(kept, d);
  if (kept == 0)
    throw std::invalid_argument("scatter: all rows coincide with the center");
  return out;
}

}  // namespace

ScatterEstimate sample_covariance(const DataMatrix& x,
                                  bool normalize_to_scatter) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n < 2) throw std::invalid_argument("sample_covariance: need n >= 2");

  Vector mean = x.colwise().mean();
  Matrix centered = x.rowwise() - mean.transpose();
  ScatterEstimate est;
  est.kind = ScatterKind::Sample;
  est.center = mean;
  est.matrix = centered.transpose() * centered / static_cast<double>(n);
  if (normalize_to_scatter) {
    const double trace = est.matrix.trace();
    if (!(trace > 0.0))
      throw std::invalid_argument(
          "sample_covariance: zero trace, cannot normalize");
    est.matrix *= static_cast<double>(d) / trace;
  }
  return est;
}

ScatterEstimate spatial_sign_covariance(const DataMatrix& x,
                                        const Vector& mu) {
  const Eigen::Index d = x.cols();
  CenteredRows c = center_and_filter(x, mu);
  const Eigen::Index n_eff = c.rows.rows();

  Matrix signs(n_eff, d);
  for (Eigen::Index i = 0; i < n_eff; ++i)
    signs.row(i) = c.rows.row(i) / c.rows.row(i).norm();

  ScatterEstimate est;
  est.kind = ScatterKind::SpatialSign;
  est.center = mu;
  est.skipped_rows = c.skipped;
  est.matrix = signs.transpose() * signs *
               (static_cast<double>(d) / static_cast<double>(n_eff));
  return est;
}

ScatterEstimate tyler_plugin(const DataMatrix& x, const Vector& mu,
                             const Matrix& v_init, int iterations,
                             const RefineCallback& refine) {
  const Eigen::Index d = x.cols();
  if (iterations < 1)
    throw std::invalid_argument("tyler_plugin: iterations must be >= 1");
  if (v_init.rows() != d || v_init.cols() != d)
    throw std::invalid_argument("tyler_plugin: v_init has wrong shape");

  CenteredRows c = center_and_filter(x, mu);
  const Eigen::Index n_eff = c.rows.rows();

  auto apply = [&](const Matrix& v) {
    Matrix acc = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n_eff; ++i) {
      const Vector row = c.rows.row(i).transpose();
      const double q = row.dot(v * row);
      if (!(q > 0.0))
        throw std::runtime_error(
            "tyler_plugin: nonpositive Mahalanobis denominator; precision "
            "input is not positive definite in practice");
      acc += row * row.transpose() / q;
    }
    acc *= static_cast<double>(d) / static_cast<double>(n_eff);
    acc *= static_cast<double>(d) / acc.trace();
    return acc;
  };

  Matrix current = apply(v_init);
  for (int k = 2; k <= iterations; ++k) {
    Matrix refined = refine ? refine(current) : current;
    Eigen::LLT<Matrix> llt(refined);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error(
          "tyler_plugin: intermediate estimate is not invertible");
    Matrix v = llt.solve(Matrix::Identity(d, d));
    current = apply(0.5 * (v + v.transpose()));
  }

  ScatterEstimate est;
  est.kind = ScatterKind::TylerPlugin;
  est.center = mu;
  est.skipped_rows = c.skipped;
  est.iterations = iterations;
  est.matrix = std::move(current);
  return est;
}

ScatterEstimate reg_tyler(const DataMatrix& x_sym, double alpha, double tol,
                          int max_iter) {
  const Eigen::Index d = x_sym.cols();
  if (!(alpha > 0.0))
    throw std::invalid_argument("reg_tyler: alpha must be positive");
  if (tol <= 0.0) throw std::invalid_argument("reg_tyler: tol must be positive");

  CenteredRows c = center_and_filter(x_sym, Vector::Zero(d));
  const Eigen::Index n_eff = c.rows.rows();
  const double data_weight = 1.0 / (1.0 + alpha);
  const double ridge_weight = alpha / (1.0 + alpha);

  ScatterEstimate est;
  est.kind = ScatterKind::RegTyler;
  est.alpha = alpha;
  est.skipped_rows = c.skipped;

  Matrix current = Matrix::Identity(d, d);
  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::LLT<Matrix> llt(current);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("reg_tyler: iterate lost positive definiteness");
    Matrix inv = llt.solve(Matrix::Identity(d, d));

    Matrix acc = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n_eff; ++i) {
      const Vector row = c.rows.row(i).transpose();
      const double q = row.dot(inv * row);
      acc += row * row.transpose() / q;
    }
    Matrix next = data_weight * (static_cast<double>(d) / n_eff) * acc +
                  ridge_weight * Matrix::Identity(d, d);

    const double rel_change = (next - current).norm() / current.norm();
    est.residual_history.push_back(rel_change);
    current = std::move(next);
    est.iterations = iter;
    est.final_residual = rel_change;
    if (rel_change < tol) {
      current *= static_cast<double>(d) / current.trace();
      est.matrix = std::move(current);
      return est;
    }
  }

  throw ConvergenceError(
      "reg_tyler: no convergence after " + std::to_string(max_iter) +
          " iterations (last relative change " +
          std::to_string(est.final_residual) + ")",
      current, est.final_residual);
}

DataMatrix symmetrize(const DataMatrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw std::invalid_argument("symmetrize: need n >= 2");
  const Eigen::Index pairs = n / 2;
  DataMatrix out(pairs, x.cols());
  for (Eigen::Index j = 0; j < pairs; ++j)
    out.row(j) = x.row(2 * j) - x.row(2 * j + 1);
  return out;
}

double regtyler_alpha(double gamma, double s_max) {
  const double sqrt_gamma = std::sqrt(gamma);
  return std::max(0.1, 1.1 * (gamma - 1.0 +
                              s_max * (1.0 + sqrt_gamma) * (1.0 + sqrt_gamma)));
}

double regtyler_alpha_default(const DataMatrix& x_sym) {
  const Eigen::Index n = x_sym.rows();
  if (n < 2) throw std::invalid_argument("regtyler_alpha_default: need n >= 2");
  const double d = static_cast<double>(x_sym.cols());
  const double gamma = d / (2.0 * static_cast<double>(n));
  const double s_max = spectral(sample_covariance(x_sym, false).matrix);
  return regtyler_alpha(gamma, s_max);
}

}  // namespace robustcov
