#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "robustcov/harness.hpp"
#include "robustcov/norms.hpp"
#include "robustcov/poet.hpp"

using namespace robustcov;

namespace {

ScenarioSpec small_scenario(TailFamily tail, int n = 60, int d = 30) {
  ScenarioSpec scenario;
  scenario.n = n;
  scenario.model.d = d;
  scenario.model.m = 3;
  scenario.model.loading_variances = {1.0, 0.5625, 0.25};
  scenario.sigma_u.kind = SigmaUSpec::Kind::Ar1;
  scenario.sigma_u.rho = 0.9;
  scenario.model.idiosyncratic_cov = scenario.sigma_u.build(d);
  scenario.tail = tail;
  return scenario;
}

PipelineSpec make_pipeline(const std::string& name, ScatterKind kind) {
  PipelineSpec spec;
  spec.name = name;
  spec.scatter_kind = kind;
  PoetSettings poet;
  poet.rule = ThresholdRule::soft();
  poet.c = 0.5;
  poet.pd_repair = true;
  spec.poet = poet;
  spec.factor_count.method = FactorCountPolicy::Method::Known;
  spec.factor_count.known_m = 3;
  return spec;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("pipeline JSON round trip") {
  nlohmann::json j = {
      {"name", "POET-TME"},
      {"scatter", "tyler_plugin"},
      {"poet", {{"rule", "scad"}, {"a", 3.7}, {"C", 0.6}, {"pd_repair", true}}},
      {"precision", {{"method", "clime"}, {"C", 0.4}}},
      {"factor_count", {{"method", "gr"}, {"max_factors", 6}}},
      {"scale_calibration", true},
      {"initializer", {{"pipeline", "POET-SS"}, {"source", "scatter_inverse"}}},
  };
  PipelineSpec spec = pipeline_spec_from_json(j);
  CHECK(spec.scatter_kind == ScatterKind::TylerPlugin);
  CHECK(spec.poet->rule.kind == ThresholdRule::Kind::Scad);
  CHECK(spec.poet->c == doctest::Approx(0.6));
  CHECK(spec.precision->method == PrecisionMethod::Clime);
  CHECK(spec.factor_count.method == FactorCountPolicy::Method::GR);
  CHECK(spec.initializer->pipeline == "POET-SS");

  PipelineSpec again = pipeline_spec_from_json(pipeline_spec_to_json(spec));
  CHECK(again.name == spec.name);
  CHECK(again.poet->c == spec.poet->c);
  CHECK(again.factor_count.max_factors == 6);

  nlohmann::json cv = j;
  cv["poet"]["C"] = "cv";
  CHECK(pipeline_spec_from_json(cv).poet->cross_validate);
}

TEST_CASE("tyler plug-in pipeline composes spatial-sign POET, inversion, "
          "plug-in, and the final thresholding") {
  ScenarioSpec scenario = small_scenario(TailFamily::student_t(4.0), 50, 20);
  scenario.model.seed = 99;
  const DataMatrix x =
      sample(scenario.model, scenario.tail, scenario.n);

  PipelineSpec tme = make_pipeline("POET-TME", ScatterKind::TylerPlugin);
  PipelineRunner runner(x, {});
  PipelineResult result = runner.run_spec(tme);

  // Manual recomposition with the same settings.
  const Vector mu = spatial_median(x).mu_hat;
  const ScatterEstimate ss = spatial_sign_covariance(x, mu);
  const double tau = threshold_level(50, 20, 0.5);
  PoetOptions repair_on;
  repair_on.pd_repair = true;
  PoetEstimate ss_poet =
      poet(ss.matrix, 3, tau, ThresholdRule::soft(), repair_on);
  Eigen::LLT<Matrix> llt(ss_poet.sigma_tau);
  REQUIRE(llt.info() == Eigen::Success);
  Matrix v_s = llt.solve(Matrix::Identity(20, 20));
  v_s = 0.5 * (v_s + v_s.transpose());
  const ScatterEstimate plug = tyler_plugin(x, mu, v_s);
  PoetEstimate refined =
      poet(plug.matrix, 3, tau, ThresholdRule::soft(), repair_on);

  CHECK(max_norm(result.v_s - v_s) < 1e-12);
  CHECK(max_norm(result.raw.matrix - plug.matrix) < 1e-12);
  CHECK(max_norm(result.sigma_tau - refined.sigma_tau) < 1e-12);
}

TEST_CASE("experiment is deterministic and thread-count independent") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 40, 16);
  config.pipelines = {make_pipeline("SAMPLE", ScatterKind::Sample),
                      make_pipeline("POET-SS", ScatterKind::SpatialSign)};
  config.reps = 4;
  config.metrics = {"sigma0_max", "lambda_ratio"};
  config.seed = 31337;
  config.threads = 1;

  ExperimentResult a = run_experiment(config);
  ExperimentResult b = run_experiment(config);
  CHECK(a.table == b.table);

  config.threads = 2;
  ExperimentResult c = run_experiment(config);
  CHECK(a.table == c.table);
}

TEST_CASE("config validation failures") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 40, 16);
  config.pipelines = {make_pipeline("SAMPLE", ScatterKind::Sample)};
  config.metrics = {"sigma0_max"};

  config.reps = 0;
  CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);

  config.reps = 2;
  config.metrics = {"not_a_metric"};
  CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);

  config.metrics = {"covx_max"};  // needs scale calibration
  CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);

  config.metrics = {"v0_max"};  // needs precision settings
  CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);
}

TEST_CASE("robust pipeline beats the sample estimator under heavy tails") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::student_t(2.2), 60, 40);
  config.pipelines = {make_pipeline("SAMPLE", ScatterKind::Sample),
                      make_pipeline("POET-TME", ScatterKind::TylerPlugin)};
  config.reps = 5;
  config.metrics = {"sigma0_max"};
  config.seed = 271828;
  config.threads = 2;

  ExperimentResult result = run_experiment(config);
  double sample_mean = -1.0, tme_mean = -1.0;
  for (const auto& row : result.table.rows) {
    if (std::get<std::string>(row[0]) == "SAMPLE")
      sample_mean = std::get<double>(row[2]);
    if (std::get<std::string>(row[0]) == "POET-TME")
      tme_mean = std::get<double>(row[2]);
  }
  REQUIRE(sample_mean > 0.0);
  REQUIRE(tme_mean > 0.0);
  CHECK(tme_mean < sample_mean);
}

TEST_CASE("aggregation matches a naive recomputation of the dumps") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 40, 16);
  config.pipelines = {make_pipeline("POET-SS", ScatterKind::SpatialSign)};
  config.reps = 6;
  config.metrics = {"sigma0_max", "sigma0_rel"};
  config.seed = 17;

  ExperimentResult result = run_experiment(config);
  for (const auto& row : result.table.rows) {
    const std::string pipeline = std::get<std::string>(row[0]);
    const std::string metric = std::get<std::string>(row[1]);
    std::vector<double> values;
    for (const auto& rep : result.replicates)
      if (rep.pipeline == pipeline && rep.metric == metric)
        values.push_back(rep.value);
    REQUIRE(!values.empty());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd =
        values.size() > 1 ? std::sqrt(ss / (values.size() - 1)) : 0.0;
    CHECK(std::abs(std::get<double>(row[2]) - mean) < 1e-12);
    CHECK(std::abs(std::get<double>(row[3]) - sd) < 1e-12);
  }
}

TEST_CASE("emit formats") {
  Table empty;
  empty.columns = {"pipeline", "metric", "mean", "sd", "failures"};
  CHECK(render(empty, EmitFormat::Csv) == "pipeline,metric,mean,sd,failures\n");

  Table table;
  table.columns = {"pipeline", "metric", "mean", "sd", "failures"};
  table.rows.push_back({std::string("SAMPLE"), std::string("sigma0_max"), 1.25,
                        0.5, std::int64_t{0}});
  table.rows.push_back({std::string("POET-SS"), std::string("sigma0_max"),
                        0.321, 0.125, std::int64_t{1}});

  CHECK(render(table, EmitFormat::Csv) ==
        "pipeline,metric,mean,sd,failures\n"
        "SAMPLE,sigma0_max,1.25,0.5,0\n"
        "POET-SS,sigma0_max,0.321,0.125,1\n");

  // JSON round trip reproduces the in-memory table exactly.
  nlohmann::json j = nlohmann::json::parse(render(table, EmitFormat::Json));
  CHECK(table_from_json(j) == table);

  CHECK(render(table, EmitFormat::PrettyText) ==
        "pipeline  metric      mean   sd     failures\n"
        "SAMPLE    sigma0_max   1.25    0.5         0\n"
        "POET-SS   sigma0_max  0.321  0.125         1\n");

  const std::string path = "emit_test_table.csv";
  emit(table, EmitFormat::Csv, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  CHECK(contents == render(table, EmitFormat::Csv));
  std::remove(path.c_str());
}

TEST_CASE("factor count experiment validates and runs") {
  FactorCountConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 60, 30);
  config.d_grid = {24, 30};
  config.methods = {FactorCountMethod::ER, FactorCountMethod::GR};
  config.reps = 5;
  config.max_factors = 8;
  config.seed = 5;
  config.threads = 2;

  Table table = run_factor_count_experiment(config);
  CHECK(table.columns ==
        std::vector<std::string>{"d", "method", "m_hat", "frequency"});
  CHECK(table.rows.size() == 2 * 2 * 8);
  // Frequencies per (d, method) sum to one.
  double total = 0.0;
  for (const auto& row : table.rows)
    if (std::get<std::int64_t>(row[0]) == 24 &&
        std::get<std::string>(row[1]) == "GR")
      total += std::get<double>(row[3]);
  CHECK(total == doctest::Approx(1.0));

  Table again = run_factor_count_experiment(config);
  CHECK(again == table);

  FactorCountConfig bad = config;
  bad.d_grid = {4};  // below m + 2
  CHECK_THROWS_AS(run_factor_count_experiment(bad), std::invalid_argument);
}

TEST_CASE("factor-count policies select the spike count on easy data") {
  // AR(0.5) noise keeps the idiosyncratic spectrum well below the third
  // spike; with rho = 0.9 at this dimension the top noise eigenvalue would
  // rival it.
  ScenarioSpec scenario = small_scenario(TailFamily::gaussian(), 150, 60);
  scenario.sigma_u.rho = 0.5;
  scenario.model.idiosyncratic_cov = scenario.sigma_u.build(60);
  scenario.model.seed = 7;
  const DataMatrix x = sample(scenario.model, scenario.tail, scenario.n);

  for (auto method :
       {FactorCountPolicy::Method::ER, FactorCountPolicy::Method::GR}) {
    PipelineSpec spec = make_pipeline("SS", ScatterKind::SpatialSign);
    spec.factor_count.method = method;
    spec.factor_count.max_factors = 8;
    PipelineRunner runner(x, {});
    PipelineResult result = runner.run_spec(spec);
    CHECK(result.m_used == 3);
  }
}

TEST_CASE("named initializer pipelines resolve through the catalog") {
  ScenarioSpec scenario = small_scenario(TailFamily::student_t(4.0), 50, 20);
  scenario.model.seed = 15;
  const DataMatrix x = sample(scenario.model, scenario.tail, scenario.n);

  PipelineSpec ss = make_pipeline("POET-SS", ScatterKind::SpatialSign);
  PipelineSpec tme = make_pipeline("POET-TME", ScatterKind::TylerPlugin);
  InitializerSettings init;
  init.pipeline = "POET-SS";
  tme.initializer = init;

  PipelineRunner runner(x, {ss, tme});
  const PipelineResult& via_name = runner.run("POET-TME");
  const PipelineResult& ss_result = runner.run("POET-SS");

  Matrix repaired = pd_repair(ss_result.sigma_tau);
  Eigen::LLT<Matrix> llt(repaired);
  Matrix v_s = llt.solve(Matrix::Identity(20, 20));
  v_s = 0.5 * (v_s + v_s.transpose());
  CHECK(max_norm(via_name.v_s - v_s) < 1e-12);

  // v0-sourced initializer requires a precision-enabled reference.
  PipelineSpec bad = tme;
  bad.initializer->source = InitializerSettings::Source::V0;
  PipelineRunner runner2(x, {ss, bad});
  CHECK_THROWS_AS(runner2.run(bad.name), std::invalid_argument);

  PipelineSpec ss_prec = ss;
  ss_prec.precision = PrecisionSettings{PrecisionMethod::Glasso, 0.5};
  PipelineRunner runner3(x, {ss_prec, bad});
  const PipelineResult& v0_init = runner3.run(bad.name);
  CHECK(max_norm(v0_init.v_s - runner3.run("POET-SS").precision->v0) == 0.0);
}

TEST_CASE("a second plug-in pass changes the estimate and stays valid") {
  ScenarioSpec scenario = small_scenario(TailFamily::student_t(4.0), 60, 24);
  scenario.model.seed = 23;
  const DataMatrix x = sample(scenario.model, scenario.tail, scenario.n);

  PipelineSpec one = make_pipeline("TME", ScatterKind::TylerPlugin);
  PipelineSpec two = one;
  two.plugin_iterations = 2;

  PipelineRunner runner(x, {});
  PipelineResult first = runner.run_spec(one);
  PipelineResult second = runner.run_spec(two);
  CHECK(max_norm(first.raw.matrix - second.raw.matrix) > 1e-10);
  CHECK(second.raw.matrix.trace() == doctest::Approx(24.0).epsilon(1e-10));
}

TEST_CASE("cross-validated threshold constant") {
  ScenarioSpec scenario = small_scenario(TailFamily::gaussian(), 80, 12);
  scenario.model.seed = 77;
  const DataMatrix x = sample(scenario.model, scenario.tail, scenario.n);

  PipelineSpec spec = make_pipeline("SS", ScatterKind::SpatialSign);
  const std::vector<double> grid = {0.25, 0.5, 1.0};
  const double c1 = select_threshold_constant(x, spec, grid);
  const double c2 = select_threshold_constant(x, spec, grid);
  CHECK(c1 == c2);
  CHECK((c1 == 0.25 || c1 == 0.5 || c1 == 1.0));

  spec.poet->cross_validate = true;
  PipelineRunner runner(x, {});
  PipelineResult result = runner.run_spec(spec);
  CHECK(result.threshold_constant > 0.0);
}

TEST_CASE("precision metrics flow through the harness") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 60, 12);
  PipelineSpec spec = make_pipeline("POET-SS", ScatterKind::SpatialSign);
  spec.precision = PrecisionSettings{PrecisionMethod::Glasso, 0.5};
  config.pipelines = {spec};
  config.reps = 2;
  config.metrics = {"v0_max", "v0u_spectral"};
  config.seed = 5150;

  ExperimentResult result = run_experiment(config);
  CHECK(result.failures.at("POET-SS") == 0);
  for (const auto& row : result.table.rows) {
    CHECK(std::get<double>(row[2]) > 0.0);
    CHECK(std::isfinite(std::get<double>(row[2])));
  }
}

TEST_CASE("covariance metrics use the mixture inflation") {
  // No-spike design so the radial calibration is unbiased: theta_hat should
  // track the mixture's 0.8 + 0.2 * 10 = 2.8 covariance inflation.
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::mixture_normal(0.2, 10.0),
                                   800, 10);
  config.scenario.model.m = 0;
  config.scenario.model.loading_variances.clear();
  config.scenario.sigma_u.rho = 0.5;
  config.scenario.model.idiosyncratic_cov = config.scenario.sigma_u.build(10);

  PipelineSpec spec = make_pipeline("TME", ScatterKind::TylerPlugin);
  spec.factor_count.known_m = 0;
  spec.scale_calibration = true;
  config.pipelines = {spec};
  config.reps = 3;
  config.metrics = {"covx_rel"};
  config.seed = 60;

  ExperimentResult result = run_experiment(config);
  // Scored against 2.8 * sigma0; without the inflation factor the relative
  // error would sit near 1.8.
  const double mean = std::get<double>(result.table.rows[0][2]);
  CHECK(mean < 0.5);
}

TEST_CASE("failing pipelines are counted and excluded") {
  HarnessConfig config;
  config.scenario = small_scenario(TailFamily::gaussian(), 40, 10);
  PipelineSpec broken = make_pipeline("BROKEN", ScatterKind::SpatialSign);
  broken.factor_count.method = FactorCountPolicy::Method::GR;
  broken.factor_count.max_factors = 20;  // exceeds min(n,d)-1: always throws
  config.pipelines = {make_pipeline("OK", ScatterKind::SpatialSign), broken};
  config.reps = 3;
  config.metrics = {"sigma0_max"};
  config.seed = 8;

  ExperimentResult result = run_experiment(config);
  CHECK(result.failures.at("OK") == 0);
  CHECK(result.failures.at("BROKEN") == 3);
  for (const auto& row : result.table.rows) {
    if (std::get<std::string>(row[0]) == "BROKEN") {
      CHECK(std::get<std::int64_t>(row[4]) == 3);
      CHECK(std::get<double>(row[2]) == 0.0);  // no successful replicates
    }
  }
}

TEST_CASE("harness config JSON parsing") {
  nlohmann::json j = {
      {"scenario",
       {{"n", 40},
        {"d", 16},
        {"m", 3},
        {"loading_variances", {1.0, 0.5625, 0.25}},
        {"sigma_u", {{"kind", "ar1"}, {"rho", 0.9}}},
        {"tail", {{"family", "gaussian"}}}}},
      {"pipelines",
       {{{"name", "SAMPLE"},
         {"scatter", "sample"},
         {"poet", {{"rule", "soft"}, {"C", 0.5}}},
         {"factor_count", {{"method", "known"}, {"m", 3}}}}}},
      {"reps", 3},
      {"metrics", {"sigma0_max"}},
      {"seed", 7}};
  HarnessConfig config = harness_config_from_json(j);
  CHECK(config.reps == 3);
  CHECK(config.pipelines.size() == 1);
  ExperimentResult result = run_experiment(config);
  CHECK(result.table.rows.size() == 1);
  CHECK(result.failures.at("SAMPLE") == 0);
}

}  // TEST_SUITE
