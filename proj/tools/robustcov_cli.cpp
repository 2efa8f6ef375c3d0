// Command line front end: Monte-Carlo estimator benchmarks, factor-count
// frequency experiments, and the rolling minimum-variance backtest.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "robustcov/backtest.hpp"
#include "robustcov/harness.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  return nlohmann::json::parse(in);
}

robustcov::EmitFormat parse_format(const std::string& name) {
  if (name == "csv") return robustcov::EmitFormat::Csv;
  if (name == "json") return robustcov::EmitFormat::Json;
  if (name == "text") return robustcov::EmitFormat::PrettyText;
  throw std::invalid_argument("unknown format '" + name + "'");
}

void write_or_print(const robustcov::Table& table,
                    const robustcov::EmitFormat format,
                    const std::string& out) {
  if (out.empty())
    std::cout << robustcov::render(table, format);
  else
    robustcov::emit(table, format, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust high-dimensional scatter/covariance estimation"};
  app.require_subcommand(1);

  std::string config_path, out_path, format_name = "text", data_path;
  int reps_override = -1;
  long long seed_override = -1;
  int threads = 0;
  int window_months = 120;
  std::string pipelines_path, date_column;

  auto* simulate = app.add_subcommand(
      "simulate", "Monte-Carlo estimator benchmark over a scenario");
  simulate->add_option("--config", config_path, "JSON config")->required();
  simulate->add_option("--out", out_path, "output path (stdout if omitted)");
  simulate->add_option("--format", format_name, "csv|json|text");
  simulate->add_option("--reps", reps_override, "override replicate count");
  simulate->add_option("--seed", seed_override, "override master seed");
  simulate->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* factors = app.add_subcommand(
      "factors", "factor-number estimation frequencies over a dimension grid");
  factors->add_option("--config", config_path, "JSON config")->required();
  factors->add_option("--out", out_path, "output path (stdout if omitted)");
  factors->add_option("--format", format_name, "csv|json|text");
  factors->add_option("--reps", reps_override, "override replicate count");
  factors->add_option("--seed", seed_override, "override master seed");
  factors->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* backtest = app.add_subcommand(
      "backtest", "rolling minimum-variance portfolio backtest");
  backtest->add_option("--data", data_path, "wide-format returns CSV")
      ->required();
  backtest->add_option("--pipelines", pipelines_path,
                       "JSON file with a pipelines array")
      ->required();
  backtest->add_option("--window", window_months,
                       "trailing window in calendar months");
  std::string rebalance = "monthly";
  backtest->add_option("--rebalance", rebalance, "rebalance frequency");
  backtest->add_option("--date-column", date_column, "date column name");
  backtest->add_option("--out", out_path,
                       "output prefix (<out>.csv and <out>_weights.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      robustcov::HarnessConfig config;
      try {
        config = robustcov::harness_config_from_json(load_json(config_path));
        if (reps_override > 0) config.reps = reps_override;
        if (seed_override >= 0)
          config.seed = static_cast<std::uint64_t>(seed_override);
        if (threads > 0) config.threads = threads;
        config.validate();
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
      }
      robustcov::ExperimentResult result = robustcov::run_experiment(config);
      write_or_print(result.table, parse_format(format_name), out_path);
      return 0;
    }

    if (factors->parsed()) {
      robustcov::FactorCountConfig config;
      try {
        config = robustcov::factors_config_from_json(load_json(config_path));
        if (reps_override > 0) config.reps = reps_override;
        if (seed_override >= 0)
          config.seed = static_cast<std::uint64_t>(seed_override);
        if (threads > 0) config.threads = threads;
        config.validate();
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
      }
      robustcov::Table table = robustcov::run_factor_count_experiment(config);
      write_or_print(table, parse_format(format_name), out_path);
      return 0;
    }

    // backtest
    std::vector<robustcov::PipelineSpec> pipelines;
    try {
      if (rebalance != "monthly")
        throw std::invalid_argument("only monthly rebalancing is supported");
      nlohmann::json j = load_json(pipelines_path);
      for (const auto& pj : j.at("pipelines"))
        pipelines.push_back(robustcov::pipeline_spec_from_json(pj));
      if (pipelines.empty())
        throw std::invalid_argument("no pipelines configured");
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfigError;
    }

    robustcov::ReturnPanel panel =
        robustcov::ingest_csv(data_path, date_column);
    for (const auto& dropped : panel.dropped_tickers)
      std::cerr << "dropped ticker with missing values: " << dropped << "\n";

    std::vector<robustcov::Strategy> strategies;
    for (const auto& spec : pipelines)
      strategies.push_back(robustcov::pipeline_strategy(spec, pipelines));
    strategies.push_back(robustcov::equal_weight_strategy());

    robustcov::BacktestReport report =
        robustcov::rolling_backtest(panel, strategies, window_months);
    if (out_path.empty()) {
      std::cout << robustcov::render(report.risk_table(),
                                     robustcov::EmitFormat::PrettyText);
    } else {
      robustcov::emit(report.risk_table(), robustcov::EmitFormat::Csv,
                      out_path + ".csv");
      robustcov::write_weights_json(report, out_path + "_weights.json");
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}
