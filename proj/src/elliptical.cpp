#include "robustcov/elliptical.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "robustcov/norms.hpp"
#include "robustcov/rng.hpp"
#include "robustcov/spectral.hpp"

namespace robustcov {

namespace {

// Stream ids carved out of each spec seed.
constexpr std::uint64_t kLoadingStream = 0;
constexpr std::uint64_t kDataStream = 1;

}  // namespace

void FactorModelSpec::validate() const {
  if (d < 1) throw std::invalid_argument("FactorModelSpec: d must be >= 1");
  if (m < 0 || m > d)
    throw std::invalid_argument("FactorModelSpec: need 0 <= m <= d");
  if (static_cast<int>(loading_variances.size()) != m)
    throw std::invalid_argument(
        "FactorModelSpec: loading_variances must have m entries");
  for (double s : loading_variances)
    if (!(s > 0.0))
      throw std::invalid_argument(
          "FactorModelSpec: loading variances must be positive");
  if (idiosyncratic_cov.rows() != d || idiosyncratic_cov.cols() != d)
    throw std::invalid_argument("FactorModelSpec: idiosyncratic_cov is not d x d");
  if (max_norm(idiosyncratic_cov - idiosyncratic_cov.transpose()) >
      1e-10 * std::max(1.0, max_norm(idiosyncratic_cov)))
    throw std::invalid_argument(
        "FactorModelSpec: idiosyncratic_cov is not symmetric");
  Eigen::LLT<Matrix> llt(idiosyncratic_cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "FactorModelSpec: idiosyncratic_cov is not positive definite");
}

void TailFamily::validate() const {
  switch (kind) {
    case Kind::Gaussian:
      break;
    case Kind::StudentT:
      if (!(nu > 2.0))
        throw std::invalid_argument("TailFamily: StudentT needs nu > 2");
      break;
    case Kind::MixtureNormal:
      if (!(weight > 0.0 && weight < 1.0))
        throw std::invalid_argument("TailFamily: weight must be in (0,1)");
      if (!(inflation > 0.0))
        throw std::invalid_argument("TailFamily: inflation must be positive");
      break;
  }
}

Matrix build_loadings(const FactorModelSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed, kLoadingStream);
  Matrix b(spec.d, spec.m);
  for (int i = 0; i < spec.d; ++i)
    for (int j = 0; j < spec.m; ++j)
      b(i, j) = std::sqrt(spec.loading_variances[j]) * rng.normal();
  return b;
}

GroundTruth ground_truth(const Matrix& loadings, const Matrix& sigma_u) {
  const Eigen::Index d = sigma_u.rows();
  if (sigma_u.cols() != d)
    throw std::invalid_argument("ground_truth: sigma_u is not square");
  if (loadings.size() > 0 && loadings.rows() != d)
    throw std::invalid_argument("ground_truth: loading rows != d");

  GroundTruth gt;
  gt.cov_x = sigma_u;
  if (loadings.size() > 0) gt.cov_x += loadings * loadings.transpose();

  const double trace = gt.cov_x.trace();
  if (!(trace > 0.0))
    throw std::runtime_error("ground_truth: nonpositive trace");
  const double c = static_cast<double>(d) / trace;
  gt.sigma0 = c * gt.cov_x;

  Eigendecomposition eig = eigendecompose(gt.sigma0);
  if (eig.values.minCoeff() <= 0.0)
    throw std::runtime_error("ground_truth: B B' + sigma_u is singular");

  const int m = static_cast<int>(loadings.cols());
  SpectralSplit sp = split(gt.sigma0, eig, m);
  gt.lambda_m = sp.lambda_m;
  gt.gamma_m = sp.gamma_m;
  gt.sigma0_u = sp.residual;

  Vector inv_vals = eig.values.array().inverse();
  gt.v0 = eig.vectors * inv_vals.asDiagonal() * eig.vectors.transpose();

  // The eigen-split residual is singular by construction (rank d - m), so
  // the residual precision is defined from the model's scaled idiosyncratic
  // covariance c * Sigma_u instead.
  Eigen::LLT<Matrix> llt(c * sigma_u);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ground_truth: sigma_u is not positive definite");
  gt.v0_u = llt.solve(Matrix::Identity(d, d));
  gt.v0_u = 0.5 * (gt.v0_u + gt.v0_u.transpose());
  return gt;
}

DataMatrix sample(const FactorModelSpec& spec, const TailFamily& tail, int n) {
  spec.validate();
  tail.validate();
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");

  const Matrix b = build_loadings(spec);
  Matrix total = spec.idiosyncratic_cov;
  if (spec.m > 0) total += b * b.transpose();
  const double c = static_cast<double>(spec.d) / total.trace();

  Eigen::LLT<Matrix> llt(spec.idiosyncratic_cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample: idiosyncratic_cov is not PD");
  const Matrix chol_u = llt.matrixL();

  const double sqrt_c = std::sqrt(c);
  // For the t family the Gaussian part is shrunk so the covariance of the
  // final draw equals c * diag(I_m, Sigma_u) exactly.
  const double t_shrink = tail.kind == TailFamily::Kind::StudentT
                              ? std::sqrt((tail.nu - 2.0) / tail.nu)
                              : 1.0;

  RngStream rng(spec.seed, kDataStream);
  DataMatrix x(n, spec.d);
  Vector zf(spec.m), zu(spec.d);
  for (int i = 0; i < n; ++i) {
    double row_scale = sqrt_c;
    switch (tail.kind) {
      case TailFamily::Kind::Gaussian:
        break;
      case TailFamily::Kind::StudentT: {
        const double s = rng.chi_squared(tail.nu) / tail.nu;
        row_scale *= t_shrink / std::sqrt(s);
        break;
      }
      case TailFamily::Kind::MixtureNormal:
        if (rng.bernoulli(tail.weight)) row_scale *= std::sqrt(tail.inflation);
        break;
    }
    for (int j = 0; j < spec.m; ++j) zf(j) = rng.normal();
    for (int j = 0; j < spec.d; ++j) zu(j) = rng.normal();

    Vector y = chol_u * zu;
    if (spec.m > 0) y += b * zf;
    x.row(i) = (row_scale * y).transpose();
  }
  return x;
}

double covariance_inflation(const TailFamily& tail) {
  if (tail.kind == TailFamily::Kind::MixtureNormal)
    return (1.0 - tail.weight) + tail.weight * tail.inflation;
  return 1.0;
}

Matrix ar1_matrix(int d, double rho) {
  if (d < 1) throw std::invalid_argument("ar1_matrix: d must be >= 1");
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = std::pow(rho, std::abs(i - j));
  return m;
}

Matrix ar1_precision_cov(int d, double rho) {
  Matrix prec = ar1_matrix(d, rho);
  Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ar1_precision_cov: AR(1) matrix is not PD");
  Matrix cov = llt.solve(Matrix::Identity(d, d));
  return 0.5 * (cov + cov.transpose());
}

Matrix SigmaUSpec::build(int d) const {
  switch (kind) {
    case Kind::Identity:
      return Matrix::Identity(d, d);
    case Kind::ScaledIdentity:
      return scale * Matrix::Identity(d, d);
    case Kind::Ar1:
      return ar1_matrix(d, rho);
    case Kind::Ar1Precision:
      return ar1_precision_cov(d, rho);
    case Kind::Explicit:
      if (explicit_matrix.rows() != d || explicit_matrix.cols() != d)
        throw std::invalid_argument("SigmaUSpec: explicit matrix is not d x d");
      return explicit_matrix;
  }
  throw std::logic_error("SigmaUSpec: unknown kind");
}

void ScenarioSpec::validate() const {
  model.validate();
  tail.validate();
  if (n < 1) throw std::invalid_argument("ScenarioSpec: n must be >= 1");
}

namespace {

std::string tail_name(TailFamily::Kind k) {
  switch (k) {
    case TailFamily::Kind::Gaussian: return "gaussian";
    case TailFamily::Kind::StudentT: return "student_t";
    case TailFamily::Kind::MixtureNormal: return "mixture_normal";
  }
  throw std::logic_error("unknown tail kind");
}

}  // namespace

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.n = j.at("n").get<int>();
  spec.model.d = j.at("d").get<int>();
  spec.model.m = j.at("m").get<int>();
  spec.model.loading_variances =
      j.value("loading_variances", std::vector<double>{});
  if (spec.model.loading_variances.empty() && spec.model.m > 0)
    throw std::invalid_argument("scenario: loading_variances missing");
  spec.model.seed = j.value("seed", std::uint64_t{0});

  const auto& su = j.at("sigma_u");
  const std::string kind = su.at("kind").get<std::string>();
  if (kind == "identity") {
    spec.sigma_u.kind = SigmaUSpec::Kind::Identity;
  } else if (kind == "scaled_identity") {
    spec.sigma_u.kind = SigmaUSpec::Kind::ScaledIdentity;
    spec.sigma_u.scale = su.at("scale").get<double>();
  } else if (kind == "ar1") {
    spec.sigma_u.kind = SigmaUSpec::Kind::Ar1;
    spec.sigma_u.rho = su.at("rho").get<double>();
  } else if (kind == "ar1_precision") {
    spec.sigma_u.kind = SigmaUSpec::Kind::Ar1Precision;
    spec.sigma_u.rho = su.at("rho").get<double>();
  } else if (kind == "explicit") {
    spec.sigma_u.kind = SigmaUSpec::Kind::Explicit;
    const auto& rows = su.at("matrix");
    const int d = spec.model.d;
    spec.sigma_u.explicit_matrix.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < d; ++c)
        spec.sigma_u.explicit_matrix(i, c) = rows.at(i).at(c).get<double>();
  } else {
    throw std::invalid_argument("scenario: unknown sigma_u kind '" + kind + "'");
  }
  spec.model.idiosyncratic_cov = spec.sigma_u.build(spec.model.d);

  const auto& tj = j.at("tail");
  const std::string family = tj.at("family").get<std::string>();
  if (family == "gaussian") {
    spec.tail = TailFamily::gaussian();
  } else if (family == "student_t") {
    spec.tail = TailFamily::student_t(tj.at("nu").get<double>());
  } else if (family == "mixture_normal") {
    spec.tail = TailFamily::mixture_normal(tj.at("weight").get<double>(),
                                           tj.at("inflation").get<double>());
  } else {
    throw std::invalid_argument("scenario: unknown tail family '" + family + "'");
  }

  spec.validate();
  return spec;
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["d"] = spec.model.d;
  j["m"] = spec.model.m;
  j["loading_variances"] = spec.model.loading_variances;
  j["seed"] = spec.model.seed;

  nlohmann::json su;
  switch (spec.sigma_u.kind) {
    case SigmaUSpec::Kind::Identity:
      su["kind"] = "identity";
      break;
    case SigmaUSpec::Kind::ScaledIdentity:
      su["kind"] = "scaled_identity";
      su["scale"] = spec.sigma_u.scale;
      break;
    case SigmaUSpec::Kind::Ar1:
      su["kind"] = "ar1";
      su["rho"] = spec.sigma_u.rho;
      break;
    case SigmaUSpec::Kind::Ar1Precision:
      su["kind"] = "ar1_precision";
      su["rho"] = spec.sigma_u.rho;
      break;
    case SigmaUSpec::Kind::Explicit: {
      su["kind"] = "explicit";
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index i = 0; i < spec.sigma_u.explicit_matrix.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < spec.sigma_u.explicit_matrix.cols(); ++c)
          row.push_back(spec.sigma_u.explicit_matrix(i, c));
        rows.push_back(row);
      }
      su["matrix"] = rows;
      break;
    }
  }
  j["sigma_u"] = su;

  nlohmann::json tj;
  tj["family"] = tail_name(spec.tail.kind);
  if (spec.tail.kind == TailFamily::Kind::StudentT) tj["nu"] = spec.tail.nu;
  if (spec.tail.kind == TailFamily::Kind::MixtureNormal) {
    tj["weight"] = spec.tail.weight;
    tj["inflation"] = spec.tail.inflation;
  }
  j["tail"] = tj;
  return j;
}

}  // namespace robustcov
