#include "robustcov/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "robustcov/norms.hpp"

namespace robustcov {

namespace {

constexpr int kMaxInitializerDepth = 8;

Matrix inverse_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("pipeline: matrix inversion failed (not PD)");
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

void PipelineSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("pipeline: name is empty");
  if (poet) poet->rule.validate();
  if (factor_count.method == FactorCountPolicy::Method::Known &&
      factor_count.known_m < 0)
    throw std::invalid_argument("pipeline: known factor count must be >= 0");
  if (factor_count.max_factors < 1)
    throw std::invalid_argument("pipeline: max_factors must be >= 1");
  if (plugin_iterations < 1)
    throw std::invalid_argument("pipeline: plugin_iterations must be >= 1");
  if (initializer && scatter_kind != ScatterKind::TylerPlugin)
    throw std::invalid_argument(
        "pipeline: initializer only applies to the Tyler plug-in");
}

PipelineRunner::PipelineRunner(const DataMatrix& x,
                               std::vector<PipelineSpec> catalog)
    : x_(x), catalog_(std::move(catalog)) {}

const Vector& PipelineRunner::location() {
  if (!mu_) mu_ = spatial_median(x_).mu_hat;
  return *mu_;
}

const PipelineResult& PipelineRunner::run(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  for (const auto& spec : catalog_) {
    if (spec.name == name) {
      PipelineResult result = run_spec_impl(spec, 0);
      return cache_.emplace(name, std::move(result)).first->second;
    }
  }
  throw std::invalid_argument("pipeline: unknown pipeline '" + name + "'");
}

PipelineResult PipelineRunner::run_spec(const PipelineSpec& spec) {
  return run_spec_impl(spec, 0);
}

Matrix PipelineRunner::resolve_initializer(const PipelineSpec& spec,
                                           int depth) {
  if (depth > kMaxInitializerDepth)
    throw std::runtime_error("pipeline: initializer reference cycle");

  InitializerSettings init =
      spec.initializer.value_or(InitializerSettings{});
  if (!init.pipeline.empty()) {
    // A named pipeline supplies V_S, either its inverted scatter estimate or
    // its precision-path output.
    const PipelineResult* ref = nullptr;
    auto it = cache_.find(init.pipeline);
    if (it != cache_.end()) {
      ref = &it->second;
    } else {
      for (const auto& other : catalog_) {
        if (other.name == init.pipeline) {
          PipelineResult result = run_spec_impl(other, depth + 1);
          ref = &cache_.emplace(init.pipeline, std::move(result)).first->second;
          break;
        }
      }
      if (ref == nullptr)
        throw std::invalid_argument("pipeline: initializer pipeline '" +
                                    init.pipeline + "' not found");
    }
    if (init.source == InitializerSettings::Source::V0) {
      if (!ref->precision)
        throw std::invalid_argument(
            "pipeline: initializer source v0 needs a precision-enabled "
            "pipeline");
      return ref->precision->v0;
    }
    return inverse_spd(pd_repair(ref->sigma_tau));
  }

  // Implicit spatial-sign POET initializer sharing this spec's settings.
  PipelineSpec ss = spec;
  ss.name = spec.name + "::init";
  ss.scatter_kind = ScatterKind::SpatialSign;
  ss.initializer.reset();
  ss.precision.reset();
  ss.scale_calibration = false;
  if (!ss.poet) ss.poet = PoetSettings{};
  ss.poet->pd_repair = true;
  auto it = cache_.find(ss.name);
  if (it == cache_.end()) {
    PipelineResult init_result = run_spec_impl(ss, depth + 1);
    it = cache_.emplace(ss.name, std::move(init_result)).first;
  }
  return inverse_spd(it->second.sigma_tau);
}

ScatterEstimate PipelineRunner::base_scatter(const PipelineSpec& spec,
                                             const Matrix& v_s) {
  switch (spec.scatter_kind) {
    case ScatterKind::Sample:
      return sample_covariance(x_, /*normalize_to_scatter=*/true);
    case ScatterKind::SpatialSign:
      return spatial_sign_covariance(x_, location());
    case ScatterKind::RegTyler: {
      DataMatrix sym = symmetrize(x_);
      const double alpha = regtyler_alpha_default(sym);
      return reg_tyler(sym, alpha);
    }
    case ScatterKind::TylerPlugin: {
      ScatterEstimate est = tyler_plugin(x_, location(), v_s, 1);
      if (spec.plugin_iterations <= 1) return est;

      RefineCallback refine;
      if (spec.poet) {
        // Each extra pass re-applies the full thresholding step before the
        // next inversion. The rank is pinned from the first pass.
        int rank = spec.factor_count.known_m;
        if (spec.factor_count.method != FactorCountPolicy::Method::Known) {
          Eigendecomposition first = eigendecompose(est.matrix);
          const FactorCountMethod fc =
              spec.factor_count.method == FactorCountPolicy::Method::ER
                  ? FactorCountMethod::ER
                  : FactorCountMethod::GR;
          rank = estimate_num_factors(first.values,
                                      spec.factor_count.max_factors, fc,
                                      static_cast<int>(x_.rows()),
                                      static_cast<int>(x_.cols()))
                     .m_hat;
        }
        const int n = static_cast<int>(x_.rows());
        const int d = static_cast<int>(x_.cols());
        const ThresholdRule rule = spec.poet->rule;
        const double tau = threshold_level(n, d, spec.poet->c);
        refine = [rule, tau, rank](const Matrix& m) {
          PoetOptions options;
          options.pd_repair = true;
          return poet(m, rank, tau, rule, options).sigma_tau;
        };
      }
      return tyler_plugin(x_, location(), v_s, spec.plugin_iterations, refine);
    }
  }
  throw std::logic_error("pipeline: unknown scatter kind");
}

PipelineResult PipelineRunner::run_spec_impl(const PipelineSpec& given,
                                             int depth) {
  given.validate();
  const int n = static_cast<int>(x_.rows());
  const int d = static_cast<int>(x_.cols());

  // Resolve a cross-validated threshold constant once; the plug-in
  // refinement and the implicit initializer then share it.
  PipelineSpec spec = given;
  if (spec.poet && spec.poet->cross_validate) {
    spec.poet->c = select_threshold_constant(x_, spec);
    spec.poet->cross_validate = false;
  }

  PipelineResult result;
  if (spec.scatter_kind == ScatterKind::TylerPlugin)
    result.v_s = resolve_initializer(spec, depth);

  result.raw = base_scatter(spec, result.v_s);

  // Factor count on the eigenvalues of the base scatter.
  Eigendecomposition eig = eigendecompose(result.raw.matrix);
  switch (spec.factor_count.method) {
    case FactorCountPolicy::Method::Known:
      result.m_used = spec.factor_count.known_m;
      break;
    case FactorCountPolicy::Method::ER:
      result.m_used =
          estimate_num_factors(eig.values, spec.factor_count.max_factors,
                               FactorCountMethod::ER, n, d)
              .m_hat;
      break;
    case FactorCountPolicy::Method::GR:
      result.m_used =
          estimate_num_factors(eig.values, spec.factor_count.max_factors,
                               FactorCountMethod::GR, n, d)
              .m_hat;
      break;
  }
  if (result.m_used > d)
    throw std::invalid_argument("pipeline: factor count exceeds dimension");

  if (spec.poet) {
    result.threshold_constant = spec.poet->c;
    result.tau = threshold_level(n, d, spec.poet->c);
    PoetOptions options;
    options.pd_repair = spec.poet->pd_repair;
    PoetEstimate est =
        poet(result.raw.matrix, result.m_used, result.tau, spec.poet->rule,
             options);
    result.sigma_tau = std::move(est.sigma_tau);
    result.sigma_u_tau = std::move(est.sigma_u_tau);
    result.split = std::move(est.split);
  } else {
    result.split = split(result.raw.matrix, eig, result.m_used);
    result.sigma_tau = result.raw.matrix;
    result.sigma_u_tau = result.split.residual;
  }

  if (spec.precision) {
    const double tau_prec = threshold_level(n, d, spec.precision->c);
    result.precision = estimate_precision(pd_repair(result.sigma_u_tau),
                                          result.split, spec.precision->method,
                                          tau_prec);
  }

  if (spec.scale_calibration) {
    Matrix v_s = result.v_s.size() > 0 ? result.v_s
                                       : inverse_spd(pd_repair(result.sigma_tau));
    Vector radii = mahalanobis_radii(x_, location(), v_s);
    const double h = default_h(n, spec.scale.epsilon, spec.scale.c);
    result.scale = huber_scale(radii, h);
    result.cov_x = covariance_from_scatter(result.sigma_tau, *result.scale);
  }
  return result;
}

double select_threshold_constant(const DataMatrix& x, const PipelineSpec& spec,
                                 const std::vector<double>& grid_in) {
  std::vector<double> grid = grid_in;
  if (grid.empty())
    for (int k = 1; k <= 20; ++k) grid.push_back(0.1 * k);
  if (!spec.poet)
    throw std::invalid_argument(
        "select_threshold_constant: spec has no POET settings");

  const int n = static_cast<int>(x.rows());
  const int folds = 5;
  if (n < 2 * folds)
    throw std::invalid_argument("select_threshold_constant: too few rows");

  // Contiguous fold split; each fold is held out once.
  std::vector<std::pair<int, int>> ranges;  // [begin, end) of validation rows
  const int base = n / folds;
  for (int f = 0; f < folds; ++f)
    ranges.emplace_back(f * base, f == folds - 1 ? n : (f + 1) * base);

  PipelineSpec fold_spec = spec;
  fold_spec.poet->cross_validate = false;
  fold_spec.poet->pd_repair = false;
  fold_spec.precision.reset();
  fold_spec.scale_calibration = false;
  fold_spec.initializer.reset();  // small folds use the implicit initializer

  // The held-out target is the raw scatter of the validation fold; the
  // plug-in kind validates against the spatial-sign scatter to avoid nested
  // initializers on small folds.
  PipelineSpec val_spec = fold_spec;
  val_spec.poet.reset();
  if (val_spec.scatter_kind == ScatterKind::TylerPlugin)
    val_spec.scatter_kind = ScatterKind::SpatialSign;

  double best_c = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double c : grid) {
    fold_spec.poet->c = c;
    double err = 0.0;
    int used = 0;
    for (const auto& [begin, end] : ranges) {
      const int val_rows = end - begin;
      DataMatrix train(n - val_rows, x.cols());
      DataMatrix val(val_rows, x.cols());
      train.topRows(begin) = x.topRows(begin);
      train.bottomRows(n - end) = x.bottomRows(n - end);
      val = x.middleRows(begin, val_rows);
      try {
        PipelineRunner train_runner(train, {});
        PipelineResult fitted = train_runner.run_spec(fold_spec);
        PipelineRunner val_runner(val, {});
        PipelineResult held_out = val_runner.run_spec(val_spec);
        err += frobenius(fitted.sigma_tau - held_out.raw.matrix);
        ++used;
      } catch (const std::exception&) {
        // fold skipped; heavy-tailed draws can defeat a solver
      }
    }
    if (used == 0) continue;
    err /= used;
    if (err < best_err) {
      best_err = err;
      best_c = c;
    }
  }
  return best_c;
}

namespace {

ThresholdRule rule_from_json(const nlohmann::json& j) {
  const std::string name = j.value("rule", std::string("soft"));
  if (name == "hard") return ThresholdRule::hard();
  if (name == "soft") return ThresholdRule::soft();
  if (name == "scad") return ThresholdRule::scad(j.value("a", 3.7));
  if (name == "adaptive_lasso")
    return ThresholdRule::adaptive_lasso(j.value("eta", 1.0));
  throw std::invalid_argument("pipeline: unknown threshold rule '" + name + "'");
}

std::string rule_name(const ThresholdRule& rule) {
  switch (rule.kind) {
    case ThresholdRule::Kind::Hard: return "hard";
    case ThresholdRule::Kind::Soft: return "soft";
    case ThresholdRule::Kind::Scad: return "scad";
    case ThresholdRule::Kind::AdaptiveLasso: return "adaptive_lasso";
  }
  throw std::logic_error("unknown rule");
}

}  // namespace

PipelineSpec pipeline_spec_from_json(const nlohmann::json& j) {
  PipelineSpec spec;
  spec.name = j.at("name").get<std::string>();

  const std::string kind = j.at("scatter").get<std::string>();
  if (kind == "sample") spec.scatter_kind = ScatterKind::Sample;
  else if (kind == "spatial_sign") spec.scatter_kind = ScatterKind::SpatialSign;
  else if (kind == "tyler_plugin") spec.scatter_kind = ScatterKind::TylerPlugin;
  else if (kind == "reg_tyler") spec.scatter_kind = ScatterKind::RegTyler;
  else
    throw std::invalid_argument("pipeline: unknown scatter kind '" + kind + "'");

  if (j.contains("poet") && !j.at("poet").is_null()) {
    const auto& pj = j.at("poet");
    PoetSettings poet;
    poet.rule = rule_from_json(pj);
    if (pj.contains("C")) {
      if (pj.at("C").is_string()) {
        if (pj.at("C").get<std::string>() != "cv")
          throw std::invalid_argument("pipeline: C must be a number or \"cv\"");
        poet.cross_validate = true;
      } else {
        poet.c = pj.at("C").get<double>();
      }
    }
    poet.pd_repair = pj.value("pd_repair", false);
    spec.poet = poet;
  }

  if (j.contains("precision") && !j.at("precision").is_null()) {
    const auto& pj = j.at("precision");
    PrecisionSettings prec;
    const std::string method = pj.at("method").get<std::string>();
    if (method == "clime") prec.method = PrecisionMethod::Clime;
    else if (method == "glasso") prec.method = PrecisionMethod::Glasso;
    else
      throw std::invalid_argument("pipeline: unknown precision method '" +
                                  method + "'");
    prec.c = pj.value("C", 0.5);
    spec.precision = prec;
  }

  if (j.contains("factor_count")) {
    const auto& fj = j.at("factor_count");
    const std::string method = fj.at("method").get<std::string>();
    if (method == "known") {
      spec.factor_count.method = FactorCountPolicy::Method::Known;
      spec.factor_count.known_m = fj.at("m").get<int>();
    } else if (method == "er") {
      spec.factor_count.method = FactorCountPolicy::Method::ER;
    } else if (method == "gr") {
      spec.factor_count.method = FactorCountPolicy::Method::GR;
    } else {
      throw std::invalid_argument("pipeline: unknown factor count method '" +
                                  method + "'");
    }
    spec.factor_count.max_factors = fj.value("max_factors", 8);
  }

  spec.scale_calibration = j.value("scale_calibration", false);
  if (j.contains("scale")) {
    spec.scale.epsilon = j.at("scale").value("epsilon", 1.0);
    spec.scale.c = j.at("scale").value("c", 1.0);
  }

  if (j.contains("initializer") && !j.at("initializer").is_null()) {
    InitializerSettings init;
    const auto& ij = j.at("initializer");
    init.pipeline = ij.value("pipeline", std::string());
    const std::string source = ij.value("source", std::string("scatter_inverse"));
    if (source == "scatter_inverse")
      init.source = InitializerSettings::Source::ScatterInverse;
    else if (source == "v0")
      init.source = InitializerSettings::Source::V0;
    else
      throw std::invalid_argument("pipeline: unknown initializer source '" +
                                  source + "'");
    spec.initializer = init;
  }

  spec.plugin_iterations = j.value("plugin_iterations", 1);
  spec.validate();
  return spec;
}

nlohmann::json pipeline_spec_to_json(const PipelineSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  switch (spec.scatter_kind) {
    case ScatterKind::Sample: j["scatter"] = "sample"; break;
    case ScatterKind::SpatialSign: j["scatter"] = "spatial_sign"; break;
    case ScatterKind::TylerPlugin: j["scatter"] = "tyler_plugin"; break;
    case ScatterKind::RegTyler: j["scatter"] = "reg_tyler"; break;
  }
  if (spec.poet) {
    nlohmann::json pj;
    pj["rule"] = rule_name(spec.poet->rule);
    if (spec.poet->rule.kind == ThresholdRule::Kind::Scad)
      pj["a"] = spec.poet->rule.scad_a;
    if (spec.poet->rule.kind == ThresholdRule::Kind::AdaptiveLasso)
      pj["eta"] = spec.poet->rule.alasso_eta;
    if (spec.poet->cross_validate)
      pj["C"] = "cv";
    else
      pj["C"] = spec.poet->c;
    pj["pd_repair"] = spec.poet->pd_repair;
    j["poet"] = pj;
  }
  if (spec.precision) {
    nlohmann::json pj;
    pj["method"] =
        spec.precision->method == PrecisionMethod::Clime ? "clime" : "glasso";
    pj["C"] = spec.precision->c;
    j["precision"] = pj;
  }
  nlohmann::json fj;
  switch (spec.factor_count.method) {
    case FactorCountPolicy::Method::Known:
      fj["method"] = "known";
      fj["m"] = spec.factor_count.known_m;
      break;
    case FactorCountPolicy::Method::ER: fj["method"] = "er"; break;
    case FactorCountPolicy::Method::GR: fj["method"] = "gr"; break;
  }
  fj["max_factors"] = spec.factor_count.max_factors;
  j["factor_count"] = fj;
  j["scale_calibration"] = spec.scale_calibration;
  if (spec.initializer) {
    nlohmann::json ij;
    ij["pipeline"] = spec.initializer->pipeline;
    ij["source"] = spec.initializer->source ==
                           InitializerSettings::Source::ScatterInverse
                       ? "scatter_inverse"
                       : "v0";
    j["initializer"] = ij;
  }
  j["plugin_iterations"] = spec.plugin_iterations;
  return j;
}

}  // namespace robustcov
