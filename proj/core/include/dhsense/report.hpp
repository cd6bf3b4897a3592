#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dhsense/metrics.hpp"
#include "dhsense/model.hpp"

namespace dhsense {

enum class Scenario { ideal, noisy };
enum class Variant { data_driven, physics_enhanced };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);
std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);
/// "Data-Driven" / "Physics-Enhanced".
std::string variant_label(Variant v);

/// One trained (architecture, variant, seed) cell, evaluated on the test split.
struct CellResult {
  Architecture architecture = Architecture::mlp;
  Variant variant = Variant::data_driven;
  std::uint64_t seed = 0;
  Metrics test;
  std::vector<double> per_sensor_mae;
  std::size_t nodes = 0;
  std::size_t parameters = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

struct Spread {
  double mean = 0.0;
  double std = 0.0;  // population std over seeds
};

struct AggregateRow {
  Architecture architecture = Architecture::mlp;
  Variant variant = Variant::data_driven;
  std::size_t runs = 0;
  Spread rmse, mae, accuracy;
  std::vector<double> per_sensor_mae;  // mean over seeds
};

/// (physics-enhanced - data-driven) / data-driven on the seed means.
struct DeltaRow {
  Architecture architecture = Architecture::mlp;
  double rmse = 0.0;
  double mae = 0.0;
  double accuracy = 0.0;
};

struct MetricsReport {
  Scenario scenario = Scenario::ideal;
  double sigma = 0.0;
  std::size_t rows = 0;
  std::size_t train_windows = 0, val_windows = 0, test_windows = 0;
  std::vector<std::string> target_names;
  std::string config_json;  // the full experiment configuration echo
  std::vector<CellResult> cells;
  std::vector<AggregateRow> aggregates;  // sorted by architecture then variant
  std::vector<DeltaRow> deltas;

  const AggregateRow* aggregate(Architecture a, Variant v) const;
  const DeltaRow* delta(Architecture a) const;
};

/// Fills aggregates and deltas from cells.
void summarize(MetricsReport& report);

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
MetricsReport load_report(const std::filesystem::path& path);

/// Table layout with RMSE and MAE scaled by 1e3 and accuracy by 1e2.
std::string render_table(const MetricsReport& report);
/// architecture,variant,sensor,mae_mean
std::string render_sensor_mae(const MetricsReport& report);

/// Writes report.json, table.txt and sensor_mae.csv into `dir` (created if
/// needed). Throws ConfigError if the directory is unwritable.
void emit_report(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace dhsense
