#include "robustcov/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "robustcov/norms.hpp"

namespace robustcov {

Eigendecomposition eigendecompose(const Matrix& s) {
  if (s.rows() != s.cols())
    throw std::invalid_argument("eigendecompose: matrix is not square");
  const double asym = max_norm(s - s.transpose());
  if (asym > 1e-10 * std::max(1.0, max_norm(s)))
    throw std::invalid_argument("eigendecompose: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecompose: solver failed");

  // Eigen returns ascending order; flip to descending.
  Eigendecomposition out;
  out.values = eig.eigenvalues().reverse();
  out.vectors = eig.eigenvectors().rowwise().reverse();
  out.vectors = normalize_eigvec_signs(std::move(out.vectors));
  return out;
}

SpectralSplit split(const Matrix& s, const Eigendecomposition& eig, int m) {
  const Eigen::Index d = s.rows();
  if (m < 0 || m > d) throw std::invalid_argument("split: m out of range");
  SpectralSplit out;
  out.lambda_m = eig.values.head(m);
  out.gamma_m = eig.vectors.leftCols(m);
  if (m == 0) {
    out.residual = s;
  } else {
    out.residual =
        s - out.gamma_m * out.lambda_m.asDiagonal() * out.gamma_m.transpose();
  }
  return out;
}

SpectralSplit split(const Matrix& s, int m) {
  return split(s, eigendecompose(s), m);
}

FactorCountResult estimate_num_factors(const Vector& eigs, int max_factors,
                                       FactorCountMethod method, int n,
                                       int d) {
  if (max_factors < 1)
    throw std::invalid_argument("estimate_num_factors: M must be >= 1");
  if (eigs.size() < max_factors + 1)
    throw std::invalid_argument(
        "estimate_num_factors: need at least M+1 eigenvalues");
  for (Eigen::Index j = 1; j < eigs.size(); ++j)
    if (eigs(j) > eigs(j - 1))
      throw std::invalid_argument(
          "estimate_num_factors: eigenvalues must be descending");

  FactorCountResult result;
  result.method = method;
  result.max_factors = max_factors;
  result.criterion_values.resize(max_factors);

  if (method == FactorCountMethod::ER) {
    for (int j = 1; j <= max_factors; ++j)
      result.criterion_values[j - 1] = eigs(j - 1) / eigs(j);
  } else {
    const int tail_end = std::min(n, d) - 1;  // V_j sums lambda_{j+1}..tail_end
    if (tail_end < max_factors)
      throw std::invalid_argument(
          "estimate_num_factors: GR needs min(n,d)-1 >= M");
    if (eigs.size() < tail_end)
      throw std::invalid_argument(
          "estimate_num_factors: GR needs min(n,d)-1 eigenvalues");

    // Nonpositive eigenvalues (possible after thresholding artifacts) are
    // clamped before the logarithms.
    const double floor = 1e-12 * eigs(0);
    Vector lam = eigs;
    for (Eigen::Index j = 0; j < lam.size(); ++j)
      lam(j) = std::max(lam(j), floor);

    // v[j] = sum_{l=j+1}^{tail_end} lambda_l (1-based l); v[0] is the full sum.
    std::vector<double> v(max_factors + 1, 0.0);
    for (int j = 0; j <= max_factors; ++j) {
      double sum = 0.0;
      for (int l = j + 1; l <= tail_end; ++l) sum += lam(l - 1);
      v[j] = sum;
    }
    for (int j = 1; j <= max_factors; ++j) {
      const double num = std::log1p(lam(j - 1) / v[j - 1]);
      const double den =
          v[j] > 0.0 ? std::log1p(lam(j) / v[j])
                     : std::numeric_limits<double>::infinity();
      result.criterion_values[j - 1] = std::isinf(den) ? 0.0 : num / den;
    }
  }

  int best = 1;
  for (int j = 2; j <= max_factors; ++j)
    if (result.criterion_values[j - 1] > result.criterion_values[best - 1])
      best = j;
  result.m_hat = best;
  return result;
}

}  // namespace robustcov
