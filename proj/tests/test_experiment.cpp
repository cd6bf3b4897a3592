#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dhsense/error.hpp"
#include "dhsense/experiment.hpp"
#include "dhsense/metrics.hpp"
#include "dhsense/report.hpp"
#include "support.hpp"

using namespace dhsense;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.rows = 240;
  c.architectures = {Architecture::mlp, Architecture::chebynet};
  c.seeds = {0, 1};
  c.model.max_epochs = 2;
  c.model.graph_hidden = 4;
  c.model.mlp_hidden = 8;
  c.model.heads = 2;
  c.model.cheb_order = 2;
  c.model.batch_size = 32;
  return c;
}

MetricsReport synthetic_report() {
  MetricsReport r;
  r.scenario = Scenario::noisy;
  r.sigma = 0.1;
  r.rows = 100;
  r.train_windows = 70;
  r.val_windows = 10;
  r.test_windows = 13;
  r.target_names = {"p_A", "t_A"};
  r.config_json = "{}";
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.5);
  // inserted out of order on purpose
  for (auto a : {Architecture::gatv2, Architecture::mlp}) {
    for (auto v : {Variant::physics_enhanced, Variant::data_driven}) {
      for (std::uint64_t s = 0; s < 3; ++s) {
        CellResult c;
        c.architecture = a;
        c.variant = v;
        c.seed = s;
        c.test.rmse = u(rng);
        c.test.mae = c.test.rmse * 0.8;
        c.test.accuracy = 1.0 - c.test.rmse;
        c.per_sensor_mae = {u(rng), u(rng)};
        c.nodes = v == Variant::data_driven ? 5 : 37;
        c.parameters = 10;
        c.epochs_run = 4;
        c.best_epoch = 3;
        c.best_val_loss = u(rng);
        r.cells.push_back(c);
      }
    }
  }
  summarize(r);
  return r;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("metric identities") {
  const Eigen::MatrixXd y = testing::random_matrix(20, 3, *std::make_unique<std::mt19937_64>(1));
  const auto perfect = compute_metrics(y, y);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.mae == 0.0);
  CHECK(perfect.accuracy == 1.0);

  Eigen::MatrixXd a(1, 2), z = Eigen::MatrixXd::Zero(1, 2);
  a << 3, 4;
  const auto m = compute_metrics(a, z);
  CHECK(m.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(m.mae == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(std::abs(m.accuracy) < 1e-15);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto p = testing::random_matrix(4, 2, rng), q = testing::random_matrix(4, 2, rng);
    const auto r = compute_metrics(p, q);
    CHECK(r.mae <= r.rmse + 1e-15);
  }

  const auto per = per_sensor_mae(a, z);
  CHECK(per(0) == 3.0);
  CHECK(per(1) == 4.0);
  CHECK_THROWS_AS(compute_metrics(a, Eigen::MatrixXd::Zero(2, 2)), ShapeError);
  CHECK_THROWS_AS(compute_metrics(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)), ShapeError);
  CHECK_THROWS_AS(compute_metrics(z, a), DomainError);
}

TEST_CASE("report aggregation and deltas") {
  const auto r = synthetic_report();
  REQUIRE(r.aggregates.size() == 4);
  CHECK(r.aggregates[0].architecture == Architecture::mlp);
  CHECK(r.aggregates[0].variant == Variant::data_driven);
  CHECK(r.aggregates[3].architecture == Architecture::gatv2);
  CHECK(r.aggregates[3].variant == Variant::physics_enhanced);
  for (auto a : {Architecture::mlp, Architecture::gatv2}) {
    double dd[3], pe[3];
    int nd = 0, np = 0;
    for (const auto& c : r.cells) {
      if (c.architecture != a) continue;
      (c.variant == Variant::data_driven ? dd[nd++] : pe[np++]) = c.test.rmse;
    }
    const double md = (dd[0] + dd[1] + dd[2]) / 3, mp = (pe[0] + pe[1] + pe[2]) / 3;
    double var = 0;
    for (double v : dd) var += (v - md) * (v - md);
    CHECK(std::abs(r.aggregate(a, Variant::data_driven)->rmse.mean - md) < 1e-12);
    CHECK(std::abs(r.aggregate(a, Variant::data_driven)->rmse.std - std::sqrt(var / 3)) < 1e-12);
    CHECK(std::abs(r.delta(a)->rmse - (mp - md) / md) < 1e-12);
  }
  CHECK(r.delta(Architecture::fgo) == nullptr);
}

TEST_CASE("report JSON round trip") {
  const auto r = synthetic_report();
  const auto text = report_to_json(r);
  const auto back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  CHECK(back.cells.size() == r.cells.size());
  CHECK(back.target_names == r.target_names);
  CHECK(back.cells[4].test.rmse == r.cells[4].test.rmse);
  CHECK_THROWS(report_from_json("{\"cells\": 3}"));
  const auto table = render_table(r);
  CHECK(table.find("GATv2") != std::string::npos);
  CHECK(table.find("rel. Delta") != std::string::npos);
  CHECK(render_sensor_mae(r).rfind("architecture,variant,sensor,mae_mean\n", 0) == 0);
}

TEST_CASE("experiment config round trip") {
  auto c = tiny_config();
  c.scenario = Scenario::noisy;
  c.plot_sensors = {"p_JR2"};
  const auto text = experiment_config_to_string(c);
  const auto back = experiment_config_from_string(text);
  CHECK(experiment_config_to_string(back) == text);
  CHECK(back.architectures == c.architectures);
  CHECK(back.model.cheb_order == 2);
  CHECK_THROWS_AS(experiment_config_from_string("{\"epochs\": 3}"), SchemaError);
  CHECK_THROWS_AS(experiment_config_from_string("{\"model\": {\"hiden\": 3}}"), SchemaError);
  CHECK_THROWS_AS(experiment_config_from_string("{\"rows\": \"many\"}"), SchemaError);
  CHECK_THROWS_AS(experiment_config_from_string("{\"architectures\": [\"rnn\"]}"), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_string("{\"split\": {\"train\": 0.9}}"), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_string("{\"rows\": "), ParseError);
  const auto defaults = experiment_config_from_string("{}");
  CHECK(defaults.rows == 2000);
  CHECK(defaults.seeds.size() == 3);
}

TEST_CASE("variant preparation") {
  auto c = tiny_config();
  const auto data = prepare_scenario(c);
  CHECK(data.flows.features() == 5);
  CHECK(data.physics.features() == 37);
  const auto dd = prepare_variant(data, Variant::data_driven, c, true);
  const auto pe = prepare_variant(data, Variant::physics_enhanced, c, false);
  CHECK(dd.feature_names.size() == 5);
  CHECK(pe.feature_names.size() == 37);
  CHECK(dd.samples.size() == 240 - 8 + 1);
  CHECK(dd.bounds.train_end == 186);
  CHECK(dd.normalization_rows == 186 - 1 + 8);
  CHECK(dd.samples.front().adjacency.rows() == 5);
  CHECK(pe.samples.front().adjacency.size() == 0);
  // the training slice is exactly [0, 1] after normalization
  const auto head = dd.feature_stats.apply(data.flows.head(dd.normalization_rows));
  CHECK(head.values.minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(head.values.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  const auto batches = make_batches(dd.samples, 0, 70, 32);
  REQUIRE(batches.size() == 3);
  CHECK(batches.back().samples() == 6);
}

TEST_CASE("small experiment end to end") {
  const auto c = tiny_config();
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  CHECK(a.report.cells.size() == 2 * 2 * 2);
  CHECK(report_to_json(a.report) == report_to_json(b.report));
  for (const auto& cell : a.report.cells) {
    CHECK(cell.nodes == (cell.variant == Variant::data_driven ? 5u : 37u));
    CHECK(cell.epochs_run == 2);
    CHECK(std::isfinite(cell.test.rmse));
    CHECK(cell.per_sensor_mae.size() == a.report.target_names.size());
  }
  CHECK(a.report.test_windows == 233 - 209);
  CHECK(cell_name(Architecture::gatv2, Variant::physics_enhanced, 2) == "gatv2_physics-enhanced_seed2");

  const auto dir = std::filesystem::temp_directory_path() / "dhsense_experiment_test";
  std::filesystem::remove_all(dir);
  write_experiment(a, c, dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "table.txt"));
  CHECK(std::filesystem::exists(dir / "history" / "chebynet_data-driven_seed1.csv"));
  CHECK(std::filesystem::exists(dir / "plots" / "mlp_physics-enhanced_seed0.csv"));
  CHECK(report_to_json(load_report(dir / "report.json")) == report_to_json(a.report));
  std::filesystem::remove_all(dir);
}

}
