#pragma once

#include <vector>

#include "robustcov/types.hpp"

namespace robustcov {

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order and each eigenvector's first nonzero entry positive.
struct Eigendecomposition {
  Vector values;   // descending
  Matrix vectors;  // columns aligned with `values`
};

Eigendecomposition eigendecompose(const Matrix& s);

/// Leading eigen-pairs plus the low-rank-removed residual of a symmetric
/// matrix.
struct SpectralSplit {
  Vector lambda_m;  // m leading eigenvalues, descending
  Matrix gamma_m;   // d x m orthonormal eigenvectors
  Matrix residual;  // input minus gamma_m * diag(lambda_m) * gamma_m'
};

SpectralSplit split(const Matrix& s, int m);

/// Same split but reusing a precomputed decomposition of the input.
SpectralSplit split(const Matrix& s, const Eigendecomposition& eig, int m);

enum class FactorCountMethod { ER, GR };

struct FactorCountResult {
  int m_hat = 0;                          // 1-based estimated factor count
  std::vector<double> criterion_values;   // criterion at j = 1..M
  FactorCountMethod method = FactorCountMethod::ER;
  int max_factors = 0;                    // search bound M
};

/// Eigenvalue-ratio / growth-ratio estimators of the number of spiked
/// factors. `eigs` must be the full descending spectrum of the scatter
/// estimate; `n` and `d` are the sample size and dimension behind it.
/// Ties in the argmax resolve to the smallest index.
FactorCountResult estimate_num_factors(const Vector& eigs, int max_factors,
                                       FactorCountMethod method, int n, int d);

}  // namespace robustcov
