#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dhsense/hydraulics.hpp"

namespace dhsense {

struct Junction {
  std::string id;
  double elevation = 0.0;  // m, horizontal network
};

struct ConsumerSpec {
  std::string id;
  double area = 0.0;               // m^2
  double return_setpoint = 60.0;   // degC
  double min_demand = 1.0;         // kW
  std::string valve;               // valve joining the feed leaf to the return leaf
};

struct SourceSpec {
  std::string supply_node;
  std::string return_node;
  double supply_temperature = 90.0;  // degC
  double supply_pressure = 500e3;    // Pa
};

/// Which components carry physical sensors.
struct SensorPlacement {
  std::vector<std::string> mass_flow;    // pipe ids
  std::vector<std::string> pressure;     // junction ids
  std::vector<std::string> temperature;  // junction ids
};

/// Supply/return network: the feed pipes form a tree rooted at the source
/// supply node, the return pipes a tree rooted at the source return node,
/// and each consumer closes one feed leaf onto one return leaf via its valve.
struct NetworkTopology {
  std::vector<Junction> junctions;
  std::vector<PipeSpec> feed_pipes;
  std::vector<PipeSpec> return_pipes;
  std::vector<ValveSpec> valves;
  std::vector<ConsumerSpec> consumers;
  SourceSpec source;
  SensorPlacement sensors;

  /// Throws ConfigError describing the first violated structural invariant.
  void validate() const;

  const PipeSpec& pipe(const std::string& id) const;
  const ValveSpec& valve(const std::string& id) const;
  const ConsumerSpec& consumer(const std::string& id) const;
  bool has_pipe(const std::string& id) const;
  bool has_junction(const std::string& id) const;

  /// Feed pipes then return pipes, file order.
  std::vector<const PipeSpec*> all_pipes() const;
};

/// Bit i set <=> consumer i (topology order) is served by the component.
using ConsumerMask = std::uint64_t;

/// Consumer set carried by every pipe and valve (keyed by component id).
std::map<std::string, ConsumerMask> consumer_masks(const NetworkTopology& topology);

/// Four-consumer network with the pipe table of the reference case study.
/// Valve coefficients and building areas are our own choices.
NetworkTopology default_topology();

NetworkTopology load_topology(const std::filesystem::path& path);
void save_topology(const NetworkTopology& topology, const std::filesystem::path& path);

std::string topology_to_string(const NetworkTopology& topology);
NetworkTopology topology_from_string(const std::string& text);

}  // namespace dhsense
