#include "robustcov/precision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "robustcov/norms.hpp"

namespace robustcov {

namespace {

// ---------------------------------------------------------------------------
// Dense Mehrotra predictor-corrector interior point method for
//   min c'z  s.t.  A z = b, z >= 0.
// Sized for the small per-column CLIME programs.
// ---------------------------------------------------------------------------

struct LpSolution {
  Vector z;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

LpSolution solve_lp(const Matrix& a, const Vector& b, const Vector& c,
                    double tol = 1e-8, int max_iter = 100) {
  const Eigen::Index nv = a.cols();

  // Least-squares starting point, shifted into the positive orthant.
  Matrix aat = a * a.transpose();
  Eigen::LDLT<Matrix> aat_fact(aat);
  Vector x = a.transpose() * aat_fact.solve(b);
  Vector y = aat_fact.solve(a * c);
  Vector s = c - a.transpose() * y;

  const double dx = std::max(-1.5 * x.minCoeff(), 0.0);
  const double ds = std::max(-1.5 * s.minCoeff(), 0.0);
  x.array() += dx;
  s.array() += ds;
  const double xs = x.dot(s);
  x.array() += 0.5 * xs / std::max(s.sum(), 1e-12) + 1e-10;
  s.array() += 0.5 * xs / std::max(x.sum(), 1e-12) + 1e-10;

  const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
  const double c_scale = 1.0 + c.cwiseAbs().maxCoeff();

  LpSolution out;
  double best_merit = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= max_iter; ++iter) {
    Vector rb = a * x - b;
    Vector rc = a.transpose() * y + s - c;
    const double mu = x.dot(s) / static_cast<double>(nv);
    const double gap = std::abs(c.dot(x) - b.dot(y)) /
                       (1.0 + std::abs(c.dot(x)));
    const double merit = std::max({rb.cwiseAbs().maxCoeff() / b_scale,
                                   rc.cwiseAbs().maxCoeff() / c_scale, gap});
    if (merit < best_merit) {
      best_merit = merit;
      out.z = x;
      out.objective = c.dot(x);
      out.iterations = iter;
    }
    if (merit < tol) {
      out.converged = true;
      return out;
    }
    // The complementarity floor is reached; nothing further to gain.
    if (mu < 1e-15) break;

    Vector d = x.cwiseQuotient(s);
    Matrix normal = a * d.asDiagonal() * a.transpose();
    // Tiny ridge keeps the factorization stable near the solution.
    normal.diagonal().array() += 1e-13 * (1.0 + normal.diagonal().maxCoeff());
    Eigen::LDLT<Matrix> fact(normal);
    if (fact.info() != Eigen::Success) break;

    auto solve_direction = [&](const Vector& r_xs, Vector& dxv, Vector& dyv,
                               Vector& dsv) {
      Vector rhs = -rb - a * (r_xs.cwiseQuotient(s)) - a * (d.asDiagonal() * rc);
      dyv = fact.solve(rhs);
      dsv = -rc - a.transpose() * dyv;
      dxv = r_xs.cwiseQuotient(s) - d.asDiagonal() * dsv;
    };

    auto max_step = [](const Vector& v, const Vector& dv) {
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
      return alpha;
    };

    // Affine-scaling (predictor) direction.
    Vector r_aff = -(x.array() * s.array()).matrix();
    Vector dx_aff, dy_aff, ds_aff;
    solve_direction(r_aff, dx_aff, dy_aff, ds_aff);
    const double ap_aff = max_step(x, dx_aff);
    const double ad_aff = max_step(s, ds_aff);
    const double mu_aff = (x + ap_aff * dx_aff).dot(s + ad_aff * ds_aff) /
                          static_cast<double>(nv);
    const double sigma = std::pow(mu_aff / mu, 3);

    // Corrector.
    Vector r_cor = r_aff.array() + sigma * mu -
                   (dx_aff.array() * ds_aff.array());
    Vector dxv, dyv, dsv;
    solve_direction(r_cor, dxv, dyv, dsv);

    const double ap = std::min(1.0, 0.9995 * max_step(x, dxv));
    const double ad = std::min(1.0, 0.9995 * max_step(s, dsv));
    x += ap * dxv;
    y += ad * dyv;
    s += ad * dsv;
  }

  // Accept the best iterate when it satisfies the documented gap tolerance.
  out.converged = best_merit <= 1e-7;
  return out;
}

}  // namespace

Matrix symmetrize_smaller_magnitude(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out(i, j) = std::abs(m(i, j)) <= std::abs(m(j, i)) ? m(i, j) : m(j, i);
  return out;
}

ClimeResult clime(const Matrix& sigma_u, double tau) {
  const Eigen::Index d = sigma_u.rows();
  if (sigma_u.cols() != d)
    throw std::invalid_argument("clime: input is not square");
  if (!(tau > 0.0)) throw std::invalid_argument("clime: tau must be positive");

  // Column program in inequality form with split variables v = p - q:
  //   min 1'(p, q)  s.t.  [ S -S; -S S ] (p, q) <= (tau 1 + e_j; tau 1 - e_j),
  // then slacks turn it into standard form.
  const Eigen::Index nv = 4 * d;  // p, q, and 2d slacks
  Matrix a = Matrix::Zero(2 * d, nv);
  a.block(0, 0, d, d) = sigma_u;
  a.block(0, d, d, d) = -sigma_u;
  a.block(d, 0, d, d) = -sigma_u;
  a.block(d, d, d, d) = sigma_u;
  a.block(0, 2 * d, 2 * d, 2 * d) = Matrix::Identity(2 * d, 2 * d);
  Vector c = Vector::Zero(nv);
  c.head(2 * d).setOnes();

  Matrix raw(d, d);
  ClimeResult result;
  result.column_objectives.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector b(2 * d);
    b.head(d).setConstant(tau);
    b.tail(d).setConstant(tau);
    b(j) += 1.0;
    b(d + j) -= 1.0;

    LpSolution sol = solve_lp(a, b, c);
    if (!sol.converged)
      throw std::runtime_error(
          "clime: column " + std::to_string(j) +
          " did not converge (program may be infeasible at this tau)");
    raw.col(j) = sol.z.head(d) - sol.z.segment(d, d);
    result.column_objectives[j] = sol.objective;
  }

  result.v = symmetrize_smaller_magnitude(raw);
  return result;
}

GlassoResult glasso(const Matrix& sigma_u, double tau, double tol,
                    int max_iter) {
  const Eigen::Index d = sigma_u.rows();
  if (sigma_u.cols() != d)
    throw std::invalid_argument("glasso: input is not square");
  if (!(tau > 0.0)) throw std::invalid_argument("glasso: tau must be positive");
  if (tol <= 0.0) throw std::invalid_argument("glasso: tol must be positive");
  if (max_norm(sigma_u - sigma_u.transpose()) >
      1e-10 * std::max(1.0, max_norm(sigma_u)))
    throw std::invalid_argument("glasso: input is not symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_u);
    if (eig.eigenvalues().minCoeff() < -1e-8)
      throw std::invalid_argument(
          "glasso: input has an eigenvalue below -1e-8; apply PD repair first");
  }

  // Working covariance; the penalized diagonal is fixed at sigma_ii + tau.
  Matrix w = sigma_u;
  w.diagonal().array() += tau;
  Matrix beta = Matrix::Zero(d, d);  // column j holds the lasso coefficients

  const double inner_tol = 0.1 * tol;
  const int inner_max = 1000;

  auto objective_at = [&](const Matrix& w_mat) {
    Eigen::PartialPivLU<Matrix> lu(w_mat);
    Matrix v = lu.inverse();
    v = 0.5 * (v + v.transpose());
    // log det V = -log det W
    double log_det_w = 0.0;
    Matrix lu_mat = lu.matrixLU();
    for (Eigen::Index i = 0; i < d; ++i)
      log_det_w += std::log(std::abs(lu_mat(i, i)));
    return (sigma_u * v).trace() + log_det_w + tau * v.cwiseAbs().sum();
  };

  GlassoResult result;
  bool converged = (d == 1);
  for (int sweep = 1; sweep <= max_iter && !converged; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      // Gather the (d-1)-sized subproblem for column j.
      Vector s12(d - 1), b(d - 1);
      std::vector<Eigen::Index> idx(d - 1);
      for (Eigen::Index i = 0, k = 0; i < d; ++i) {
        if (i == j) continue;
        idx[k] = i;
        s12(k) = sigma_u(i, j);
        b(k) = beta(i, j);
        ++k;
      }

      // Coordinate descent on 0.5 b'W11 b - s12'b + tau |b|_1 with an
      // incrementally maintained residual r = W11 b.
      Vector r = Vector::Zero(d - 1);
      for (Eigen::Index k = 0; k < d - 1; ++k) {
        if (b(k) == 0.0) continue;
        for (Eigen::Index l = 0; l < d - 1; ++l)
          r(l) += w(idx[l], idx[k]) * b(k);
      }
      for (int pass = 0; pass < inner_max; ++pass) {
        double inner_change = 0.0;
        for (Eigen::Index k = 0; k < d - 1; ++k) {
          const double wkk = w(idx[k], idx[k]);
          const double grad = s12(k) - (r(k) - wkk * b(k));
          double nb = 0.0;
          if (std::abs(grad) > tau)
            nb = std::copysign(std::abs(grad) - tau, grad) / wkk;
          const double delta = nb - b(k);
          if (delta != 0.0) {
            for (Eigen::Index l = 0; l < d - 1; ++l)
              r(l) += delta * w(idx[l], idx[k]);
            b(k) = nb;
            inner_change = std::max(inner_change, std::abs(delta));
          }
        }
        if (inner_change < inner_tol) break;
      }

      for (Eigen::Index k = 0; k < d - 1; ++k) {
        const double w_new = r(k);
        max_change = std::max(max_change, std::abs(w(idx[k], j) - w_new));
        w(idx[k], j) = w_new;
        w(j, idx[k]) = w_new;
        beta(idx[k], j) = b(k);
      }
    }

    result.sweeps = sweep;
    result.objective.push_back(objective_at(w));
    if (max_change < tol) converged = true;
  }

  if (!converged && d > 1) {
    std::ostringstream msg;
    msg << "glasso: no convergence after " << max_iter
        << " sweeps; objective trace:";
    const std::size_t k0 =
        result.objective.size() > 5 ? result.objective.size() - 5 : 0;
    for (std::size_t k = k0; k < result.objective.size(); ++k)
      msg << " " << result.objective[k];
    Matrix best = w.inverse();
    throw ConvergenceError(msg.str(), 0.5 * (best + best.transpose()),
                           result.objective.empty() ? 0.0
                                                    : result.objective.back());
  }

  // Recover the precision matrix column by column.
  result.v.resize(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double quad = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (i != j) quad += w(i, j) * beta(i, j);
    const double vjj = 1.0 / (w(j, j) - quad);
    result.v(j, j) = vjj;
    for (Eigen::Index i = 0; i < d; ++i)
      if (i != j) result.v(i, j) = -beta(i, j) * vjj;
  }
  result.v = 0.5 * (result.v + result.v.transpose()).eval();
  if (d == 1) result.objective.push_back(objective_at(w));
  return result;
}

Matrix woodbury_correct(const Matrix& v_u, const Matrix& gamma_m,
                        const Vector& lambda_m) {
  const Eigen::Index d = v_u.rows();
  const Eigen::Index m = gamma_m.cols();
  if (v_u.cols() != d)
    throw std::invalid_argument("woodbury_correct: v_u is not square");
  if (m == 0) return v_u;
  if (gamma_m.rows() != d || lambda_m.size() != m)
    throw std::invalid_argument("woodbury_correct: shape mismatch");
  for (Eigen::Index j = 0; j < m; ++j)
    if (!(lambda_m(j) > 0.0))
      throw std::invalid_argument(
          "woodbury_correct: eigenvalues must be positive");

  Matrix vg = v_u * gamma_m;
  Matrix inner = lambda_m.cwiseInverse().asDiagonal().toDenseMatrix() +
                 gamma_m.transpose() * vg;
  Eigen::PartialPivLU<Matrix> lu(inner);
  if (std::abs(lu.determinant()) < 1e-300)
    throw std::runtime_error("woodbury_correct: inner matrix is singular");
  Matrix corrected = v_u - vg * lu.solve(vg.transpose());
  return 0.5 * (corrected + corrected.transpose());
}

PrecisionEstimate estimate_precision(const Matrix& sigma_u_tau,
                                     const SpectralSplit& split,
                                     PrecisionMethod method, double tau) {
  PrecisionEstimate est;
  est.method = method;
  est.tau = tau;
  est.v0_u = method == PrecisionMethod::Clime ? clime(sigma_u_tau, tau).v
                                              : glasso(sigma_u_tau, tau).v;
  est.v0 = woodbury_correct(est.v0_u, split.gamma_m, split.lambda_m);
  return est;
}

}  // namespace robustcov
