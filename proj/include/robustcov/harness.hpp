#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "robustcov/elliptical.hpp"
#include "robustcov/pipeline.hpp"

namespace robustcov {

/// Column-named table shared by the experiment outputs.
struct Table {
  using Cell = std::variant<std::string, double, std::int64_t>;

  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  bool operator==(const Table& other) const = default;
};

enum class EmitFormat { Csv, Json, PrettyText };

std::string render(const Table& table, EmitFormat format);
void emit(const Table& table, EmitFormat format, const std::string& path);
Table table_from_json(const nlohmann::json& j);

struct HarnessConfig {
  ScenarioSpec scenario;
  std::vector<PipelineSpec> pipelines;
  int reps = 50;
  std::vector<std::string> metrics;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct ReplicateResult {
  std::string pipeline;
  std::string metric;
  double value = 0.0;
  int replicate = 0;
  double elapsed_seconds = 0.0;
};

struct ExperimentResult {
  Table table;  // pipeline,metric,mean,sd,failures
  std::vector<ReplicateResult> replicates;
  std::map<std::string, int> failures;  // per-pipeline failed replicate count
};

/// Known metric names for run_experiment.
const std::vector<std::string>& known_metrics();

/// Samples `reps` replicates of the scenario, runs every pipeline, scores
/// the requested metrics against the per-replicate ground truth, and
/// aggregates mean and standard deviation per (pipeline, metric). Pipeline
/// failures are excluded from aggregation and counted.
ExperimentResult run_experiment(const HarnessConfig& config);

struct FactorCountConfig {
  ScenarioSpec scenario;  // n, m, tail; d is swept
  std::vector<int> d_grid;
  std::vector<FactorCountMethod> methods;
  int reps = 100;
  int max_factors = 8;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

/// Empirical frequency of each estimated factor count per (d, method);
/// table columns d,method,m_hat,frequency.
Table run_factor_count_experiment(const FactorCountConfig& config);

HarnessConfig harness_config_from_json(const nlohmann::json& j);
FactorCountConfig factors_config_from_json(const nlohmann::json& j);

}  // namespace robustcov
