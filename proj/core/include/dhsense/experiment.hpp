#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dhsense/augment.hpp"
#include "dhsense/checkpoint.hpp"
#include "dhsense/graph.hpp"
#include "dhsense/model.hpp"
#include "dhsense/normalization.hpp"
#include "dhsense/report.hpp"
#include "dhsense/train.hpp"

namespace dhsense {

struct ExperimentConfig {
  std::string dataset = "generate";  // or a dataset CSV path
  std::string topology;              // empty: built-in network
  std::size_t rows = 2000;
  std::uint64_t weather_seed = 2023;
  Scenario scenario = Scenario::ideal;
  double sigma = 0.1;  // kg/s, noisy scenario only
  std::uint64_t noise_seed = 97;
  std::vector<Architecture> architectures = all_architectures();
  std::vector<Variant> variants = {Variant::data_driven, Variant::physics_enhanced};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  ModelConfig model;
  SplitFractions split;
  std::size_t stride = 1;
  AdjacencyOptions adjacency;
  AugmentOptions augment;
  std::vector<std::string> plot_sensors = {"p_JR1", "t_JR1"};
  std::string output_dir = "results";
  std::size_t jobs = 1;
  bool save_checkpoints = false;

  /// Throws ConfigError on empty seed/architecture lists, bad fractions, ...
  void validate() const;
};

std::string experiment_config_to_string(const ExperimentConfig& config);
/// Keys absent from `text` keep their defaults; unknown keys throw SchemaError.
ExperimentConfig experiment_config_from_string(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Sensor table (noise applied) and the three feature blocks derived from it.
struct ScenarioData {
  SensorTable table;
  FeatureMatrix physics;  // flows + augmented nodes
  FeatureMatrix flows;    // flows only
  FeatureMatrix targets;  // virtual sensors
};

ScenarioData prepare_scenario(const ExperimentConfig& config);

/// Normalized, windowed samples for one input variant.
struct VariantData {
  Variant variant = Variant::data_driven;
  std::vector<std::string> feature_names;
  NormalizationStats feature_stats, target_stats;
  std::vector<GraphSample> samples;
  SplitBounds bounds;
  std::size_t normalization_rows = 0;  // stats were fitted on rows [0, this)
};

/// Windows all rows, fits normalization on the rows covered by training
/// windows only, and builds adjacencies when `with_adjacency`.
VariantData prepare_variant(const ScenarioData& data, Variant variant, const ExperimentConfig& config,
                            bool with_adjacency);

/// Consecutive samples [begin, end) in chunks of `batch_size`.
std::vector<BatchedGraph> make_batches(const std::vector<GraphSample>& samples, std::size_t begin, std::size_t end,
                                       std::size_t batch_size);

struct CellArtifacts {
  Architecture architecture = Architecture::mlp;
  Variant variant = Variant::data_driven;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  std::vector<std::size_t> test_hours;  // hour of each test window's last step
  Eigen::MatrixXd test_actual;          // normalized
  Eigen::MatrixXd test_predicted;       // normalized
  NormalizationStats target_stats;
  std::vector<NamedTensor> checkpoint;  // filled when save_checkpoints
};

struct ExperimentResult {
  MetricsReport report;
  std::vector<CellArtifacts> cells;  // same order as report.cells
};

using LogFn = std::function<void(const std::string&)>;

/// Every architecture x variant x seed cell. Errors are rethrown with the
/// cell identity prepended.
ExperimentResult run_experiment(const ExperimentConfig& config, const LogFn& log = {});

/// emit_report plus history/<cell>.csv, plots/<cell>.csv and, if present,
/// checkpoints/<cell>.json.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir);

std::string cell_name(Architecture a, Variant v, std::uint64_t seed);

}  // namespace dhsense
