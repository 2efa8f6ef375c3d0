#include "robustcov/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "robustcov/location.hpp"
#include "robustcov/norms.hpp"
#include "robustcov/rng.hpp"

namespace robustcov {

namespace {

void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n_tasks));
  if (threads == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string cell_to_string(const Table::Cell& cell) {
  if (std::holds_alternative<std::string>(cell))
    return std::get<std::string>(cell);
  if (std::holds_alternative<double>(cell)) {
    // Shortest round-trip representation, matching the JSON output.
    return nlohmann::json(std::get<double>(cell)).dump();
  }
  return std::to_string(std::get<std::int64_t>(cell));
}

std::string cell_to_pretty(const Table::Cell& cell) {
  if (std::holds_alternative<double>(cell)) {
    std::ostringstream os;
    os.precision(6);
    os << std::get<double>(cell);
    return os.str();
  }
  return cell_to_string(cell);
}

}  // namespace

std::string render(const Table& table, EmitFormat format) {
  std::ostringstream os;
  switch (format) {
    case EmitFormat::Csv: {
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "," : "") << table.columns[c];
      os << "\n";
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
          os << (c ? "," : "") << cell_to_string(row[c]);
        os << "\n";
      }
      return os.str();
    }
    case EmitFormat::Json: {
      nlohmann::json j;
      j["columns"] = table.columns;
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& row : table.rows) {
        nlohmann::json jrow = nlohmann::json::array();
        for (const auto& cell : row) {
          if (std::holds_alternative<std::string>(cell))
            jrow.push_back(std::get<std::string>(cell));
          else if (std::holds_alternative<double>(cell))
            jrow.push_back(std::get<double>(cell));
          else
            jrow.push_back(std::get<std::int64_t>(cell));
        }
        rows.push_back(std::move(jrow));
      }
      j["rows"] = rows;
      return j.dump(2) + "\n";
    }
    case EmitFormat::PrettyText: {
      std::vector<std::size_t> widths(table.columns.size());
      std::vector<std::vector<std::string>> cells;
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        widths[c] = table.columns[c].size();
      for (const auto& row : table.rows) {
        std::vector<std::string> line;
        for (std::size_t c = 0; c < row.size(); ++c) {
          line.push_back(cell_to_pretty(row[c]));
          widths[c] = std::max(widths[c], line.back().size());
        }
        cells.push_back(std::move(line));
      }
      auto pad = [&](const std::string& s, std::size_t w, bool left) {
        std::string out = s;
        while (out.size() < w) {
          if (left)
            out.push_back(' ');
          else
            out.insert(out.begin(), ' ');
        }
        return out;
      };
      std::vector<bool> left_align(table.columns.size(), false);
      if (!table.rows.empty())
        for (std::size_t c = 0; c < table.columns.size(); ++c)
          left_align[c] =
              std::holds_alternative<std::string>(table.rows.front()[c]);
      for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "  " : "") << pad(table.columns[c], widths[c], true);
      os << "\n";
      for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c)
          os << (c ? "  " : "") << pad(line[c], widths[c], left_align[c]);
        os << "\n";
      }
      return os.str();
    }
  }
  throw std::logic_error("render: unknown format");
}

void emit(const Table& table, EmitFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit: cannot open '" + path + "'");
  out << render(table, format);
  if (!out) throw std::runtime_error("emit: write failed for '" + path + "'");
}

Table table_from_json(const nlohmann::json& j) {
  Table table;
  table.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& jrow : j.at("rows")) {
    std::vector<Table::Cell> row;
    for (const auto& cell : jrow) {
      if (cell.is_string())
        row.emplace_back(cell.get<std::string>());
      else if (cell.is_number_float())
        row.emplace_back(cell.get<double>());
      else
        row.emplace_back(cell.get<std::int64_t>());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

const std::vector<std::string>& known_metrics() {
  static const std::vector<std::string> metrics = {
      "sigma0_max",    "sigma0_rel",     "sigma0_frob", "sigma0_spectral",
      "lambda_ratio",  "gamma_max_scaled",
      "sigma0u_spectral", "sigma0u_max", "sigma0u_frob",
      "covx_max",      "covx_rel",       "covx_spectral", "covx_frob",
      "v0_max",        "v0_frob",        "v0_spectral",
      "v0u_max",       "v0u_frob",       "v0u_spectral",
      "m_used"};
  return metrics;
}

namespace {

bool needs_scale(const std::string& metric) {
  return metric.rfind("covx_", 0) == 0;
}

bool needs_precision(const std::string& metric) {
  return metric.rfind("v0", 0) == 0;
}

double evaluate_metric(const std::string& metric, const PipelineResult& result,
                       const GroundTruth& gt, double cov_inflation) {
  if (metric == "sigma0_max") return max_norm(result.sigma_tau - gt.sigma0);
  if (metric == "sigma0_rel")
    return rel_frobenius(result.sigma_tau - gt.sigma0, gt.sigma0);
  if (metric == "sigma0_frob") return frobenius(result.sigma_tau - gt.sigma0);
  if (metric == "sigma0_spectral")
    return spectral(result.sigma_tau - gt.sigma0);
  if (metric == "lambda_ratio" || metric == "gamma_max_scaled") {
    const Eigen::Index k =
        std::min(result.split.lambda_m.size(), gt.lambda_m.size());
    if (k == 0) return 0.0;
    if (metric == "lambda_ratio")
      return ratio_error(result.split.lambda_m.head(k), gt.lambda_m.head(k));
    return eigvec_error(result.split.gamma_m.leftCols(k),
                        gt.gamma_m.leftCols(k));
  }
  if (metric == "sigma0u_spectral")
    return spectral(result.sigma_u_tau - gt.sigma0_u);
  if (metric == "sigma0u_max") return max_norm(result.sigma_u_tau - gt.sigma0_u);
  if (metric == "sigma0u_frob")
    return frobenius(result.sigma_u_tau - gt.sigma0_u);
  // The generated data have covariance cov_inflation * sigma0 (the model
  // scales (f,u) so the base covariance has trace d), so covariance
  // estimates score against that matrix.
  if (metric.rfind("covx_", 0) == 0) {
    const Matrix target = cov_inflation * gt.sigma0;
    if (metric == "covx_max") return max_norm(*result.cov_x - target);
    if (metric == "covx_rel")
      return rel_frobenius(*result.cov_x - target, target);
    if (metric == "covx_spectral") return spectral(*result.cov_x - target);
    if (metric == "covx_frob") return frobenius(*result.cov_x - target);
  }
  if (metric == "v0_max") return max_norm(result.precision->v0 - gt.v0);
  if (metric == "v0_frob") return frobenius(result.precision->v0 - gt.v0);
  if (metric == "v0_spectral") return spectral(result.precision->v0 - gt.v0);
  if (metric == "v0u_max") return max_norm(result.precision->v0_u - gt.v0_u);
  if (metric == "v0u_frob") return frobenius(result.precision->v0_u - gt.v0_u);
  if (metric == "v0u_spectral")
    return spectral(result.precision->v0_u - gt.v0_u);
  if (metric == "m_used") return static_cast<double>(result.m_used);
  throw std::invalid_argument("harness: unknown metric '" + metric + "'");
}

}  // namespace

void HarnessConfig::validate() const {
  scenario.validate();
  if (reps < 1) throw std::invalid_argument("harness: reps must be >= 1");
  if (pipelines.empty())
    throw std::invalid_argument("harness: no pipelines configured");
  std::set<std::string> names;
  for (const auto& p : pipelines) {
    p.validate();
    if (!names.insert(p.name).second)
      throw std::invalid_argument("harness: duplicate pipeline name '" +
                                  p.name + "'");
  }
  if (metrics.empty())
    throw std::invalid_argument("harness: no metrics configured");
  const auto& known = known_metrics();
  for (const auto& metric : metrics) {
    if (std::find(known.begin(), known.end(), metric) == known.end())
      throw std::invalid_argument("harness: unknown metric '" + metric + "'");
    for (const auto& p : pipelines) {
      if (needs_scale(metric) && !p.scale_calibration)
        throw std::invalid_argument("harness: metric '" + metric +
                                    "' needs scale_calibration on pipeline '" +
                                    p.name + "'");
      if (needs_precision(metric) && !p.precision)
        throw std::invalid_argument("harness: metric '" + metric +
                                    "' needs precision settings on pipeline '" +
                                    p.name + "'");
    }
  }
}

ExperimentResult run_experiment(const HarnessConfig& config) {
  config.validate();
  const int reps = config.reps;

  struct RepOutcome {
    std::vector<ReplicateResult> rows;
    std::map<std::string, bool> failed;  // per pipeline
  };
  std::vector<RepOutcome> outcomes(reps);

  parallel_for(reps, config.threads, [&](int rep) {
    FactorModelSpec model = config.scenario.model;
    model.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep));
    const Matrix b = build_loadings(model);
    const GroundTruth gt = ground_truth(b, model.idiosyncratic_cov);
    const DataMatrix x = sample(model, config.scenario.tail, config.scenario.n);

    PipelineRunner runner(x, config.pipelines);
    RepOutcome& outcome = outcomes[rep];
    for (const auto& spec : config.pipelines) {
      const auto start = std::chrono::steady_clock::now();
      try {
        const PipelineResult& result = runner.run(spec.name);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        const double inflation = covariance_inflation(config.scenario.tail);
        for (const auto& metric : config.metrics) {
          ReplicateResult row;
          row.pipeline = spec.name;
          row.metric = metric;
          row.value = evaluate_metric(metric, result, gt, inflation);
          row.replicate = rep;
          row.elapsed_seconds = elapsed;
          outcome.rows.push_back(std::move(row));
        }
        outcome.failed[spec.name] = false;
      } catch (const std::exception&) {
        outcome.failed[spec.name] = true;
      }
    }
  });

  ExperimentResult result;
  for (const auto& spec : config.pipelines) result.failures[spec.name] = 0;
  for (int rep = 0; rep < reps; ++rep) {
    for (auto& row : outcomes[rep].rows)
      result.replicates.push_back(std::move(row));
    for (const auto& [name, failed] : outcomes[rep].failed)
      if (failed) ++result.failures[name];
  }

  result.table.columns = {"pipeline", "metric", "mean", "sd", "failures"};
  for (const auto& spec : config.pipelines) {
    for (const auto& metric : config.metrics) {
      double sum = 0.0;
      int count = 0;
      for (const auto& row : result.replicates)
        if (row.pipeline == spec.name && row.metric == metric) {
          sum += row.value;
          ++count;
        }
      const double mean = count > 0 ? sum / count : 0.0;
      double ss = 0.0;
      for (const auto& row : result.replicates)
        if (row.pipeline == spec.name && row.metric == metric)
          ss += (row.value - mean) * (row.value - mean);
      const double sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
      result.table.rows.push_back(
          {spec.name, metric, mean, sd,
           static_cast<std::int64_t>(result.failures[spec.name])});
    }
  }
  return result;
}

void FactorCountConfig::validate() const {
  scenario.validate();
  if (reps < 1) throw std::invalid_argument("factors: reps must be >= 1");
  if (d_grid.empty()) throw std::invalid_argument("factors: empty d grid");
  if (methods.empty()) throw std::invalid_argument("factors: no methods");
  if (max_factors < 1)
    throw std::invalid_argument("factors: max_factors must be >= 1");
  for (int d : d_grid) {
    if (d < scenario.model.m + 2)
      throw std::invalid_argument(
          "factors: d must be at least m + 2 for ratio criteria");
    if (std::min(scenario.n, d) - 1 < max_factors + 1)
      throw std::invalid_argument(
          "factors: min(n, d) - 1 must exceed max_factors");
  }
}

Table run_factor_count_experiment(const FactorCountConfig& config) {
  config.validate();
  const int reps = config.reps;
  const int n_d = static_cast<int>(config.d_grid.size());

  // counts[d_index][method_index][m_hat - 1]
  std::vector<std::vector<std::vector<std::atomic<int>>>> counts(n_d);
  for (auto& per_d : counts) {
    per_d = std::vector<std::vector<std::atomic<int>>>(config.methods.size());
    for (auto& per_m : per_d)
      per_m = std::vector<std::atomic<int>>(config.max_factors);
  }

  parallel_for(n_d * reps, config.threads, [&](int task) {
    const int d_index = task / reps;
    const int rep = task % reps;
    const int d = config.d_grid[d_index];

    FactorModelSpec model = config.scenario.model;
    model.d = d;
    model.idiosyncratic_cov = config.scenario.sigma_u.build(d);
    model.seed = derive_seed(
        config.seed,
        (static_cast<std::uint64_t>(d_index) << 32) |
            static_cast<std::uint64_t>(rep));

    const DataMatrix x = sample(model, config.scenario.tail, config.scenario.n);
    const Vector mu = spatial_median(x).mu_hat;
    const ScatterEstimate s = spatial_sign_covariance(x, mu);
    const Eigendecomposition eig = eigendecompose(s.matrix);

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const FactorCountResult fc =
          estimate_num_factors(eig.values, config.max_factors,
                               config.methods[mi], config.scenario.n, d);
      counts[d_index][mi][fc.m_hat - 1].fetch_add(1);
    }
  });

  Table table;
  table.columns = {"d", "method", "m_hat", "frequency"};
  for (int di = 0; di < n_d; ++di) {
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const std::string method =
          config.methods[mi] == FactorCountMethod::ER ? "ER" : "GR";
      for (int m = 1; m <= config.max_factors; ++m) {
        table.rows.push_back(
            {static_cast<std::int64_t>(config.d_grid[di]), method,
             static_cast<std::int64_t>(m),
             static_cast<double>(counts[di][mi][m - 1].load()) / reps});
      }
    }
  }
  return table;
}

HarnessConfig harness_config_from_json(const nlohmann::json& j) {
  HarnessConfig config;
  config.scenario = scenario_from_json(j.at("scenario"));
  for (const auto& pj : j.at("pipelines"))
    config.pipelines.push_back(pipeline_spec_from_json(pj));
  config.reps = j.value("reps", 50);
  config.metrics = j.value(
      "metrics", std::vector<std::string>{"sigma0_max", "lambda_ratio",
                                          "gamma_max_scaled", "sigma0_rel",
                                          "sigma0u_spectral"});
  config.seed = j.value("seed", std::uint64_t{0});
  config.threads = j.value("threads", 0);
  config.validate();
  return config;
}

FactorCountConfig factors_config_from_json(const nlohmann::json& j) {
  FactorCountConfig config;
  config.scenario = scenario_from_json(j.at("scenario"));
  config.d_grid = j.at("d_grid").get<std::vector<int>>();
  if (j.contains("methods")) {
    for (const auto& mj : j.at("methods")) {
      const std::string name = mj.get<std::string>();
      if (name == "ER" || name == "er")
        config.methods.push_back(FactorCountMethod::ER);
      else if (name == "GR" || name == "gr")
        config.methods.push_back(FactorCountMethod::GR);
      else
        throw std::invalid_argument("factors: unknown method '" + name + "'");
    }
  } else {
    config.methods = {FactorCountMethod::ER, FactorCountMethod::GR};
  }
  config.reps = j.value("reps", 100);
  config.max_factors = j.value("max_factors", 8);
  config.seed = j.value("seed", std::uint64_t{0});
  config.threads = j.value("threads", 0);
  config.validate();
  return config;
}

}  // namespace robustcov
