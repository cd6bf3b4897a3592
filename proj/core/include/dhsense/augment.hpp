#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhsense/hydraulics.hpp"
#include "dhsense/sensor_table.hpp"
#include "dhsense/topology.hpp"

namespace dhsense {

/// Signed sum of mass-flow sensors, e.g. "FP2 + FP3" or "FP0 - FP4".
struct FlowExpression {
  struct Term {
    int sign = 1;
    std::string sensor;  // pipe id carrying a mass-flow sensor
  };
  std::vector<Term> terms;

  std::string to_string() const;
  static FlowExpression parse(const std::string& text);
  double evaluate(const SensorTable& table, std::size_t row) const;
};

/// Which sensor expression supplies the mass flow of each pipe and valve.
struct AugmentationMap {
  std::vector<std::pair<std::string, FlowExpression>> pipes;   // topology pipe order
  std::vector<std::pair<std::string, FlowExpression>> valves;  // topology valve order
};

/// Resolves every pipe/valve flow from the placed flow sensors by continuity.
/// Throws ConfigError naming the first pipe that cannot be determined.
AugmentationMap derive_augmentation_map(const NetworkTopology& topology);

std::string augmentation_map_to_string(const AugmentationMap& map);
AugmentationMap augmentation_map_from_string(const std::string& text);
AugmentationMap load_augmentation_map(const std::filesystem::path& path);
void save_augmentation_map(const AugmentationMap& map, const std::filesystem::path& path);

enum class Provenance { physical, derived };

/// Time-major feature matrix (rows = hours) with named columns.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<Provenance> provenance;
  Eigen::MatrixXd values;  // rows x features

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t features() const { return names.size(); }
  std::size_t count(Provenance p) const;
  /// Selects the listed columns, in the given order.
  FeatureMatrix select(const std::vector<std::size_t>& columns) const;
  FeatureMatrix head(std::size_t rows) const;
};

struct AugmentOptions {
  double nominal_temperature = 70.0;  // degC, water temperature assumed for the |dT| feature
  double nominal_ambient = 10.0;      // degC
  double flow_floor = 1e-6;           // kg/s
  double max_temperature_drop = 50.0; // K
  FrictionOptions friction;
};

/// Flow sensors followed by |dP| per pipe, |dT| per pipe and |dP| per valve.
FeatureMatrix augment_physics(const SensorTable& table, const NetworkTopology& topology, const FluidProps& fluid,
                              const AugmentationMap& map, const AugmentOptions& opts = {});

/// Flow sensors only (the data-driven input).
FeatureMatrix flow_features(const SensorTable& table);

/// Pressure and temperature columns (the virtual sensors to estimate).
FeatureMatrix target_features(const SensorTable& table);

/// Zero-mean Gaussian noise with std `sigma` (kg/s) on every mass-flow column.
SensorTable inject_noise(const SensorTable& table, double sigma, std::uint64_t seed);

/// FeatureMatrix as a dataset-format table for inspection (`time` = row index).
SensorTable features_as_table(const FeatureMatrix& features);

}  // namespace dhsense
