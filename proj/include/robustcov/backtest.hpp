#pragma once

#include <functional>
#include <string>
#include <vector>

#include "robustcov/harness.hpp"
#include "robustcov/pipeline.hpp"
#include "robustcov/types.hpp"

namespace robustcov {

struct Date {
  int year = 0;
  int month = 0;  // 1..12
  int day = 0;    // 1..31

  int month_index() const { return year * 12 + (month - 1); }
  std::string iso() const;
  static Date parse(const std::string& text);

  auto operator<=>(const Date&) const = default;
};

/// Complete panel of simple returns, one row per trading day.
struct ReturnPanel {
  std::vector<Date> dates;           // strictly increasing
  std::vector<std::string> tickers;  // column labels
  Matrix returns;                    // T x d
  std::vector<std::string> dropped_tickers;  // removed for missing values
};

/// Parses a wide-format CSV (date column plus one column per ticker).
/// Tickers with any missing value are dropped and reported. Dates must be
/// strictly increasing.
ReturnPanel ingest_csv(const std::string& path,
                       const std::string& date_column = "",
                       const std::vector<std::string>& ticker_filter = {});

/// Minimum-variance weights sigma_inv 1 / (1' sigma_inv 1). Any positive
/// rescaling of sigma_inv yields the same weights.
Vector mvp_weights(const Matrix& sigma_inv);

/// A backtest strategy maps a window of returns to portfolio weights.
struct Strategy {
  std::string name;
  std::function<Vector(const DataMatrix&)> fit;
};

Strategy equal_weight_strategy();
Strategy fixed_sigma_strategy(const std::string& name, const Matrix& sigma);

/// Wraps an estimator pipeline: fit the scatter on the window, invert the
/// PD-repaired estimate, take minimum-variance weights. The full catalog is
/// needed so initializer references resolve.
Strategy pipeline_strategy(const PipelineSpec& spec,
                           const std::vector<PipelineSpec>& catalog);

struct RebalanceRecord {
  Date date;           // first trading day of the rebalance month
  std::string pipeline;
  Vector weights;
  double turnover = 0.0;  // l1 change versus the previous weights
  bool skipped = false;   // estimation failed; month has no returns
};

struct BacktestReport {
  struct RiskRow {
    std::string period;  // calendar year or "all"
    std::string pipeline;
    double annualized_risk = 0.0;
    int days = 0;
  };

  std::vector<RebalanceRecord> weight_history;
  std::vector<RiskRow> risks;

  Table risk_table() const;  // columns year,pipeline,annualized_risk
};

/// Monthly-rebalanced out-of-sample backtest. At the first trading day of
/// each month, each strategy is fitted on all observations within the
/// trailing `window_months` calendar months and held for that month.
/// Annualized risk is sqrt(252) times the standard deviation of the daily
/// portfolio returns within each calendar year.
BacktestReport rolling_backtest(const ReturnPanel& panel,
                                const std::vector<Strategy>& strategies,
                                int window_months);

void write_weights_json(const BacktestReport& report, const std::string& path);

}  // namespace robustcov
