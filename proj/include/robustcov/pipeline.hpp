#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustcov/location.hpp"
#include "robustcov/poet.hpp"
#include "robustcov/precision.hpp"
#include "robustcov/scale.hpp"
#include "robustcov/scatter.hpp"

namespace robustcov {

struct PoetSettings {
  ThresholdRule rule;
  double c = 0.5;              // threshold constant in tau = C * w_n
  bool cross_validate = false; // grid-search C over {0.1,...,2.0}
  bool pd_repair = false;
};

struct FactorCountPolicy {
  enum class Method { Known, ER, GR };
  Method method = Method::Known;
  int known_m = 0;
  int max_factors = 8;
};

struct PrecisionSettings {
  PrecisionMethod method = PrecisionMethod::Glasso;
  double c = 0.5;  // tau = C * w_n
};

/// Where a Tyler plug-in pipeline gets its precision input V_S from.
struct InitializerSettings {
  std::string pipeline;  // catalog name; empty = implicit spatial-sign POET
  enum class Source { ScatterInverse, V0 };
  Source source = Source::ScatterInverse;
};

struct ScaleSettings {
  double epsilon = 1.0;
  double c = 1.0;
};

struct PipelineSpec {
  std::string name;
  ScatterKind scatter_kind = ScatterKind::SpatialSign;
  std::optional<PoetSettings> poet;
  std::optional<PrecisionSettings> precision;
  FactorCountPolicy factor_count;
  bool scale_calibration = false;
  ScaleSettings scale;
  std::optional<InitializerSettings> initializer;  // TylerPlugin only
  int plugin_iterations = 1;

  void validate() const;
};

struct PipelineResult {
  ScatterEstimate raw;   // pre-thresholding scatter
  Matrix sigma_tau;      // final scatter estimate
  Matrix sigma_u_tau;    // thresholded residual (or split residual, no POET)
  SpectralSplit split;   // split used for the reassembly
  int m_used = 0;
  double tau = 0.0;
  double threshold_constant = 0.0;
  Matrix v_s;            // precision input used for the plug-in / radii
  std::optional<PrecisionEstimate> precision;
  std::optional<HuberScale> scale;
  std::optional<Matrix> cov_x;  // theta_hat * sigma_tau
};

/// Runs pipelines against one data matrix, sharing the spatial median and
/// caching results so initializer references resolve once.
class PipelineRunner {
 public:
  PipelineRunner(const DataMatrix& x, std::vector<PipelineSpec> catalog);

  const PipelineResult& run(const std::string& name);
  PipelineResult run_spec(const PipelineSpec& spec);

  const Vector& location();
  const DataMatrix& data() const { return x_; }

 private:
  Matrix resolve_initializer(const PipelineSpec& spec, int depth);
  PipelineResult run_spec_impl(const PipelineSpec& spec, int depth);
  ScatterEstimate base_scatter(const PipelineSpec& spec, const Matrix& v_s);

  DataMatrix x_;
  std::vector<PipelineSpec> catalog_;
  std::map<std::string, PipelineResult> cache_;
  std::optional<Vector> mu_;
};

/// 5-fold cross-validated choice of the threshold constant, minimizing the
/// Frobenius discrepancy between the thresholded fold estimate and the
/// held-out scatter. Grid defaults to {0.1, 0.2, ..., 2.0}.
double select_threshold_constant(const DataMatrix& x, const PipelineSpec& spec,
                                 const std::vector<double>& grid = {});

PipelineSpec pipeline_spec_from_json(const nlohmann::json& j);
nlohmann::json pipeline_spec_to_json(const PipelineSpec& spec);

}  // namespace robustcov
