#include "robustcov/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "robustcov/poet.hpp"

namespace robustcov {

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(const std::string& text) {
  Date d;
  char sep1 = 0, sep2 = 0;
  std::istringstream is(text);
  if (!(is >> d.year >> sep1 >> d.month >> sep2 >> d.day) || sep1 != '-' ||
      sep2 != '-' || d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw std::invalid_argument("date: cannot parse '" + text + "'");
  return d;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ReturnPanel ingest_csv(const std::string& path, const std::string& date_column,
                       const std::vector<std::string>& ticker_filter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("ingest_csv: empty file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2)
    throw std::runtime_error("ingest_csv: header needs a date and tickers");

  std::size_t date_idx = 0;
  if (!date_column.empty()) {
    auto it = std::find(header.begin(), header.end(), date_column);
    if (it == header.end())
      throw std::runtime_error("ingest_csv: date column '" + date_column +
                               "' not found");
    date_idx = static_cast<std::size_t>(it - header.begin());
  }

  std::set<std::string> wanted(ticker_filter.begin(), ticker_filter.end());
  std::vector<std::size_t> ticker_cols;
  std::vector<std::string> tickers;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == date_idx) continue;
    if (!wanted.empty() && wanted.count(header[c]) == 0) continue;
    ticker_cols.push_back(c);
    tickers.push_back(header[c]);
  }
  if (tickers.empty())
    throw std::runtime_error("ingest_csv: no ticker columns selected");

  std::vector<Date> dates;
  std::vector<std::vector<double>> values(tickers.size());
  std::vector<bool> complete(tickers.size(), true);

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < header.size())
      fields.resize(header.size());  // trailing blanks count as missing

    Date date;
    try {
      date = Date::parse(trim(fields[date_idx]));
    } catch (const std::exception&) {
      throw std::runtime_error("ingest_csv: bad date at row " +
                               std::to_string(line_no));
    }
    if (!dates.empty() && !(dates.back() < date))
      throw std::runtime_error("ingest_csv: dates not strictly increasing at row " +
                               std::to_string(line_no));
    dates.push_back(date);

    for (std::size_t k = 0; k < ticker_cols.size(); ++k) {
      const std::string cell = trim(fields[ticker_cols[k]]);
      if (cell.empty()) {
        complete[k] = false;
        values[k].push_back(0.0);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw std::runtime_error("ingest_csv: bad number at row " +
                                 std::to_string(line_no) + ", column '" +
                                 tickers[k] + "'");
      values[k].push_back(v);
    }
  }
  if (dates.empty()) throw std::runtime_error("ingest_csv: no data rows");

  ReturnPanel panel;
  panel.dates = std::move(dates);
  for (std::size_t k = 0; k < tickers.size(); ++k)
    if (!complete[k]) panel.dropped_tickers.push_back(tickers[k]);

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < tickers.size(); ++k)
    if (complete[k]) kept.push_back(k);
  if (kept.empty())
    throw std::runtime_error("ingest_csv: every ticker has missing values");

  panel.returns.resize(static_cast<Eigen::Index>(panel.dates.size()),
                       static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    panel.tickers.push_back(tickers[kept[k]]);
    for (std::size_t t = 0; t < panel.dates.size(); ++t)
      panel.returns(static_cast<Eigen::Index>(t),
                    static_cast<Eigen::Index>(k)) = values[kept[k]][t];
  }
  return panel;
}

Vector mvp_weights(const Matrix& sigma_inv) {
  if (sigma_inv.rows() != sigma_inv.cols())
    throw std::invalid_argument("mvp_weights: matrix is not square");
  Vector raw = sigma_inv * Vector::Ones(sigma_inv.rows());
  const double denom = raw.sum();
  if (std::abs(denom) < 1e-12 * std::max(1.0, raw.cwiseAbs().maxCoeff()))
    throw std::runtime_error("mvp_weights: degenerate normalizer 1' V 1");
  return raw / denom;
}

Strategy equal_weight_strategy() {
  Strategy s;
  s.name = "EW";
  s.fit = [](const DataMatrix& window) {
    const Eigen::Index d = window.cols();
    return Vector::Constant(d, 1.0 / static_cast<double>(d)).eval();
  };
  return s;
}

Strategy fixed_sigma_strategy(const std::string& name, const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("fixed_sigma_strategy: sigma is not PD");
  Matrix inv = llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
  Vector weights = mvp_weights(0.5 * (inv + inv.transpose()));
  Strategy s;
  s.name = name;
  s.fit = [weights](const DataMatrix&) { return weights; };
  return s;
}

Strategy pipeline_strategy(const PipelineSpec& spec,
                           const std::vector<PipelineSpec>& catalog) {
  Strategy s;
  s.name = spec.name;
  s.fit = [spec, catalog](const DataMatrix& window) {
    PipelineRunner runner(window, catalog);
    PipelineResult result = runner.run_spec(spec);
    Matrix repaired = pd_repair(result.sigma_tau);
    Eigen::LLT<Matrix> llt(repaired);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("pipeline_strategy: estimate not invertible");
    Matrix inv =
        llt.solve(Matrix::Identity(repaired.rows(), repaired.cols()));
    return mvp_weights(0.5 * (inv + inv.transpose()));
  };
  return s;
}

Table BacktestReport::risk_table() const {
  Table table;
  table.columns = {"year", "pipeline", "annualized_risk"};
  for (const auto& row : risks)
    table.rows.push_back({row.period, row.pipeline, row.annualized_risk});
  return table;
}

BacktestReport rolling_backtest(const ReturnPanel& panel,
                                const std::vector<Strategy>& strategies,
                                int window_months) {
  const Eigen::Index t_total = panel.returns.rows();
  if (t_total != static_cast<Eigen::Index>(panel.dates.size()))
    throw std::invalid_argument("rolling_backtest: dates/returns mismatch");
  if (window_months < 1)
    throw std::invalid_argument("rolling_backtest: window must be >= 1");
  if (strategies.empty())
    throw std::invalid_argument("rolling_backtest: no strategies");

  // Row ranges per calendar month, in date order.
  std::vector<std::pair<int, std::pair<Eigen::Index, Eigen::Index>>> months;
  for (Eigen::Index t = 0; t < t_total; ++t) {
    const int mi = panel.dates[t].month_index();
    if (months.empty() || months.back().first != mi)
      months.push_back({mi, {t, t + 1}});
    else
      months.back().second.second = t + 1;
  }
  if (static_cast<int>(months.size()) < window_months + 1)
    throw std::invalid_argument(
        "rolling_backtest: panel shorter than window + 1 months");

  BacktestReport report;
  std::map<std::string, std::vector<std::pair<Eigen::Index, double>>>
      daily_returns;  // strategy -> (row, portfolio return)
  std::map<std::string, Vector> previous_weights;

  const int first_month = months.front().first;
  for (std::size_t k = 0; k < months.size(); ++k) {
    const int month_index = months[k].first;
    const auto [begin, end] = months[k].second;

    // Trade only once a full window of history exists.
    if (month_index - first_month < window_months) continue;

    // All rows within the trailing window_months calendar months; they form
    // a contiguous block because dates are sorted.
    const int window_start = month_index - window_months;
    Eigen::Index train_begin = -1, train_end = -1;
    for (Eigen::Index t = 0; t < begin; ++t) {
      const int mi = panel.dates[t].month_index();
      if (mi >= window_start && mi < month_index) {
        if (train_begin < 0) train_begin = t;
        train_end = t + 1;
      }
    }
    if (train_begin < 0) continue;

    const DataMatrix window =
        panel.returns.middleRows(train_begin, train_end - train_begin);

    for (const auto& strategy : strategies) {
      RebalanceRecord record;
      record.date = panel.dates[begin];
      record.pipeline = strategy.name;
      try {
        Vector weights = strategy.fit(window);
        if (weights.size() != panel.returns.cols())
          throw std::runtime_error("strategy returned wrong weight length");
        record.weights = weights;
        auto prev = previous_weights.find(strategy.name);
        record.turnover =
            prev == previous_weights.end()
                ? weights.cwiseAbs().sum()
                : (weights - prev->second).cwiseAbs().sum();
        previous_weights[strategy.name] = weights;

        auto& series = daily_returns[strategy.name];
        for (Eigen::Index t = begin; t < end; ++t)
          series.emplace_back(t, panel.returns.row(t).dot(weights));
      } catch (const std::exception&) {
        record.skipped = true;
        previous_weights.erase(strategy.name);
      }
      report.weight_history.push_back(std::move(record));
    }
  }

  // Aggregate annualized risk per calendar year and overall.
  auto annualized = [](const std::vector<double>& r) {
    const int n = static_cast<int>(r.size());
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : r) ss += (v - mean) * (v - mean);
    return std::sqrt(252.0) * std::sqrt(ss / (n - 1));
  };

  for (const auto& strategy : strategies) {
    auto it = daily_returns.find(strategy.name);
    if (it == daily_returns.end()) continue;
    std::map<int, std::vector<double>> by_year;
    std::vector<double> all;
    for (const auto& [row, value] : it->second) {
      by_year[panel.dates[row].year].push_back(value);
      all.push_back(value);
    }
    if (all.size() >= 2)
      report.risks.push_back({"all", strategy.name, annualized(all),
                              static_cast<int>(all.size())});
    for (const auto& [year, values] : by_year) {
      if (values.size() < 2) continue;
      report.risks.push_back({std::to_string(year), strategy.name,
                              annualized(values),
                              static_cast<int>(values.size())});
    }
  }
  return report;
}

void write_weights_json(const BacktestReport& report, const std::string& path) {
  nlohmann::json j;
  nlohmann::json rebalances = nlohmann::json::array();
  for (const auto& record : report.weight_history) {
    nlohmann::json rj;
    rj["date"] = record.date.iso();
    rj["pipeline"] = record.pipeline;
    rj["skipped"] = record.skipped;
    rj["turnover"] = record.turnover;
    std::vector<double> w(record.weights.data(),
                          record.weights.data() + record.weights.size());
    rj["weights"] = w;
    rebalances.push_back(std::move(rj));
  }
  j["rebalances"] = rebalances;
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_weights_json: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace robustcov
