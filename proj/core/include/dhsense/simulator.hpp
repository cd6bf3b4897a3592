#pragma once

#include <map>
#include <string>
#include <vector>

#include "dhsense/hydraulics.hpp"
#include "dhsense/sensor_table.hpp"
#include "dhsense/topology.hpp"
#include "dhsense/weather.hpp"

namespace dhsense {

struct SteadyStateOptions {
  double tol = 1e-9;  // K, max change of consumer inlet temperatures
  int max_iter = 100;
  FrictionOptions friction;
  double pressure_band_min = 300e3;  // Pa
  double pressure_band_max = 500e3;
  double temperature_band_min = 50.0;  // degC
  double temperature_band_max = 90.0;
};

/// Solution of one hour. Per-pipe vectors follow `NetworkModel::pipes()`,
/// per-junction vectors follow `NetworkTopology::junctions`, per-consumer
/// vectors follow `NetworkTopology::consumers`.
struct SteadyState {
  std::vector<double> pipe_flow;           // kg/s
  std::vector<double> pipe_pressure_drop;  // Pa
  std::vector<double> pipe_heat_loss;      // kW
  std::vector<double> junction_pressure;   // Pa
  std::vector<double> junction_temperature;  // degC
  std::vector<double> consumer_flow;       // kg/s
  std::vector<double> consumer_inlet_temperature;
  std::vector<double> consumer_heat;       // kW actually delivered
  std::vector<double> valve_pressure_drop; // Pa
  double source_flow = 0.0;
  double source_heat = 0.0;                // kW
  double max_continuity_residual = 0.0;    // relative to source flow
  int iterations = 0;
  std::vector<std::string> warnings;

  double energy_closure() const;  // |q_src - sum q_cons - sum q_loss| / q_src
};

/// Topology plus precomputed traversal orders for repeated solves.
class NetworkModel {
 public:
  explicit NetworkModel(NetworkTopology topology, FluidProps fluid = {});

  const NetworkTopology& topology() const { return topology_; }
  const FluidProps& fluid() const { return fluid_; }
  const std::vector<const PipeSpec*>& pipes() const { return pipes_; }
  std::size_t pipe_index(const std::string& id) const;
  std::size_t junction_index(const std::string& id) const;

  /// Fixed point over consumer inlet temperatures; see SteadyState for layout.
  SteadyState solve(const std::vector<double>& demands_kw, double t_amb, const SteadyStateOptions& opts = {}) const;

 private:
  NetworkTopology topology_;
  FluidProps fluid_;
  std::vector<const PipeSpec*> pipes_;
  std::vector<ConsumerMask> pipe_masks_;
  std::vector<std::size_t> feed_order_;    // pipe indices, root first
  std::vector<std::size_t> return_order_;  // pipe indices, leaves first
  std::vector<std::size_t> pipe_up_;       // junction index per pipe
  std::vector<std::size_t> pipe_down_;
  std::vector<std::size_t> consumer_feed_node_;
  std::vector<std::size_t> consumer_return_node_;
  std::vector<std::vector<std::size_t>> consumer_return_path_;  // return pipe indices to the source
  std::map<std::string, std::size_t> junction_index_;
  std::map<std::string, std::size_t> pipe_index_;
  std::size_t supply_node_ = 0;
  std::size_t return_node_ = 0;
};

SteadyState solve_steady_state(const NetworkTopology& topology, const std::vector<double>& demands_kw,
                               const FluidProps& fluid, double t_amb, const SteadyStateOptions& opts = {});

struct DatasetOptions {
  DemandLaw demand_law;
  SteadyStateOptions steady;
};

struct SimulationRun {
  SensorTable table;
  std::vector<SteadyState> states;  // one per hour
};

/// One steady solve per weather hour; sensor columns follow the placement map.
SimulationRun simulate(const NetworkTopology& topology, const WeatherSeries& weather, const FluidProps& fluid,
                       const DatasetOptions& opts = {});

SensorTable generate_dataset(const NetworkTopology& topology, const WeatherSeries& weather, const FluidProps& fluid,
                             const DatasetOptions& opts = {});

}  // namespace dhsense
