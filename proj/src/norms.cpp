#include "robustcov/norms.hpp"

#include <cmath>
#include <stdexcept>

#include "robustcov/spectral.hpp"

namespace robustcov {

double max_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double frobenius(const Matrix& m) { return m.norm(); }

double spectral(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double l1_op(const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

double linf_op(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

namespace {

Matrix inverse_sqrt_psd(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("rel_frobenius: eigendecomposition failed");
  const Vector& vals = eig.eigenvalues();
  if (vals.minCoeff() <= 0.0)
    throw std::runtime_error("rel_frobenius: sigma is not positive definite");
  Vector inv_sqrt = vals.array().rsqrt();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

double rel_frobenius(const Matrix& m, const Matrix& sigma) {
  if (sigma.rows() != m.rows() || sigma.cols() != m.cols())
    throw std::invalid_argument("rel_frobenius: shape mismatch");
  Matrix w = inverse_sqrt_psd(sigma);
  const double d = static_cast<double>(m.rows());
  return (w * m * w).norm() / std::sqrt(d);
}

double ratio_error(const Vector& lambda_hat, const Vector& lambda) {
  if (lambda_hat.size() != lambda.size())
    throw std::invalid_argument("ratio_error: length mismatch");
  double worst = 0.0;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    if (lambda(j) == 0.0)
      throw std::invalid_argument("ratio_error: zero true eigenvalue");
    worst = std::max(worst, std::abs(lambda_hat(j) / lambda(j) - 1.0));
  }
  return worst;
}

Matrix normalize_eigvec_signs(Matrix gamma, double zero_tol) {
  for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
      if (std::abs(gamma(i, j)) > zero_tol) {
        if (gamma(i, j) < 0.0) gamma.col(j) *= -1.0;
        break;
      }
    }
  }
  return gamma;
}

double eigvec_error(const Matrix& gamma_hat, const Matrix& gamma) {
  if (gamma_hat.rows() != gamma.rows() || gamma_hat.cols() != gamma.cols())
    throw std::invalid_argument("eigvec_error: shape mismatch");
  if (gamma.cols() == 0) return 0.0;
  Matrix a = normalize_eigvec_signs(gamma_hat);
  Matrix b = normalize_eigvec_signs(gamma);
  const double d = static_cast<double>(gamma.rows());
  return std::sqrt(d) * max_norm(a - b);
}

ErrorReport error_report(const Matrix& m, const ErrorReportRequest& request,
                         const Matrix* sigma) {
  ErrorReport report;
  if (request.max_norm) report.max_norm = max_norm(m);
  if (request.frobenius) report.frobenius = frobenius(m);
  if (request.spectral) report.spectral = spectral(m);
  if (request.l1_op) report.l1_op = l1_op(m);
  if (request.linf_op) report.linf_op = linf_op(m);
  if (request.rel_frobenius) {
    if (sigma == nullptr)
      throw std::invalid_argument("error_report: rel_frobenius needs sigma");
    report.rel_frobenius = rel_frobenius(m, *sigma);
  }
  return report;
}

}  // namespace robustcov
