#include "dhsense/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "dhsense/error.hpp"

namespace dhsense {

double SteadyState::energy_closure() const {
  double sum = 0.0;
  for (double q : consumer_heat) sum += q;
  for (double q : pipe_heat_loss) sum += q;
  return std::abs(source_heat - sum) / std::abs(source_heat);
}

NetworkModel::NetworkModel(NetworkTopology topology, FluidProps fluid)
    : topology_(std::move(topology)), fluid_(fluid) {
  topology_.validate();
  fluid_.validate();
  for (std::size_t j = 0; j < topology_.junctions.size(); ++j) junction_index_[topology_.junctions[j].id] = j;
  pipes_ = topology_.all_pipes();
  const auto masks = consumer_masks(topology_);
  for (std::size_t p = 0; p < pipes_.size(); ++p) {
    pipe_index_[pipes_[p]->id] = p;
    pipe_masks_.push_back(masks.at(pipes_[p]->id));
    pipe_up_.push_back(junction_index_.at(pipes_[p]->upstream));
    pipe_down_.push_back(junction_index_.at(pipes_[p]->downstream));
  }
  supply_node_ = junction_index_.at(topology_.source.supply_node);
  return_node_ = junction_index_.at(topology_.source.return_node);

  const std::size_t n_feed = topology_.feed_pipes.size();
  // feed: breadth first from the source
  std::vector<std::size_t> frontier{supply_node_};
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (auto j : frontier) {
      for (std::size_t p = 0; p < n_feed; ++p) {
        if (pipe_up_[p] == j) {
          feed_order_.push_back(p);
          next.push_back(pipe_down_[p]);
        }
      }
    }
    frontier = std::move(next);
  }
  // return: reverse of breadth first from the source return node
  frontier = {return_node_};
  std::vector<std::size_t> root_first;
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (auto j : frontier) {
      for (std::size_t p = n_feed; p < pipes_.size(); ++p) {
        if (pipe_down_[p] == j) {
          root_first.push_back(p);
          next.push_back(pipe_up_[p]);
        }
      }
    }
    frontier = std::move(next);
  }
  return_order_.assign(root_first.rbegin(), root_first.rend());

  for (std::size_t i = 0; i < topology_.consumers.size(); ++i) {
    const auto& v = topology_.valve(topology_.consumers[i].valve);
    consumer_feed_node_.push_back(junction_index_.at(v.upstream));
    consumer_return_node_.push_back(junction_index_.at(v.downstream));
    std::vector<std::size_t> path;
    for (std::size_t p = n_feed; p < pipes_.size(); ++p) {
      if (pipe_masks_[p] & (ConsumerMask{1} << i)) path.push_back(p);
    }
    consumer_return_path_.push_back(std::move(path));
  }
}

std::size_t NetworkModel::pipe_index(const std::string& id) const {
  auto it = pipe_index_.find(id);
  if (it == pipe_index_.end()) throw ConfigError("unknown pipe '" + id + "'");
  return it->second;
}

std::size_t NetworkModel::junction_index(const std::string& id) const {
  auto it = junction_index_.find(id);
  if (it == junction_index_.end()) throw ConfigError("unknown junction '" + id + "'");
  return it->second;
}

SteadyState NetworkModel::solve(const std::vector<double>& demands_kw, double t_amb,
                                const SteadyStateOptions& opts) const {
  const auto& consumers = topology_.consumers;
  const std::size_t n_cons = consumers.size();
  const std::size_t n_pipes = pipes_.size();
  const std::size_t n_junc = topology_.junctions.size();
  if (demands_kw.size() != n_cons) throw ConfigError("one demand per consumer required");
  for (std::size_t i = 0; i < n_cons; ++i) {
    if (!(demands_kw[i] >= consumers[i].min_demand)) {
      throw ConfigError("demand of consumer '" + consumers[i].id + "' below its floor");
    }
  }
  const double cp = fluid_.heat_capacity;
  const double t_supply = topology_.source.supply_temperature;

  SteadyState s;
  s.pipe_flow.assign(n_pipes, 0.0);
  s.pipe_pressure_drop.assign(n_pipes, 0.0);
  s.pipe_heat_loss.assign(n_pipes, 0.0);
  s.junction_pressure.assign(n_junc, std::numeric_limits<double>::quiet_NaN());
  s.junction_temperature.assign(n_junc, std::numeric_limits<double>::quiet_NaN());
  s.consumer_flow.assign(n_cons, 0.0);
  s.consumer_inlet_temperature.assign(n_cons, t_supply);
  s.consumer_heat.assign(n_cons, 0.0);
  s.valve_pressure_drop.assign(n_cons, 0.0);

  auto aggregate_flows = [&] {
    for (std::size_t p = 0; p < n_pipes; ++p) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n_cons; ++i) {
        if (pipe_masks_[p] & (ConsumerMask{1} << i)) sum += s.consumer_flow[i];
      }
      s.pipe_flow[p] = sum;
    }
    s.source_flow = 0.0;
    for (double m : s.consumer_flow) s.source_flow += m;
  };

  auto propagate_feed_temperatures = [&] {
    s.junction_temperature[supply_node_] = t_supply;
    for (auto p : feed_order_) {
      const auto r = pipe_outlet_temperature(s.junction_temperature[pipe_up_[p]], t_amb, s.pipe_flow[p], *pipes_[p], fluid_);
      s.junction_temperature[pipe_down_[p]] = r.outlet_temperature;
      s.pipe_heat_loss[p] = r.heat_loss;
    }
  };

  double change = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    for (std::size_t i = 0; i < n_cons; ++i) {
      const double approach = s.consumer_inlet_temperature[i] - consumers[i].return_setpoint;
      if (approach <= 0.0) throw DomainError("infeasible demand: non-positive approach temperature");
      s.consumer_flow[i] = demands_kw[i] / (cp * approach);
    }
    aggregate_flows();
    propagate_feed_temperatures();
    change = 0.0;
    for (std::size_t i = 0; i < n_cons; ++i) {
      const double t_in = s.junction_temperature[consumer_feed_node_[i]];
      change = std::max(change, std::abs(t_in - s.consumer_inlet_temperature[i]));
      s.consumer_inlet_temperature[i] = t_in;
    }
    if (change < opts.tol) break;
  }
  if (!(change < opts.tol)) throw ConvergenceError("steady state did not converge", change);
  s.iterations = it + 1;

  for (std::size_t i = 0; i < n_cons; ++i) {
    s.consumer_heat[i] = s.consumer_flow[i] * cp * (s.consumer_inlet_temperature[i] - consumers[i].return_setpoint);
  }

  // Return side: consumer outflow at its setpoint, mass-weighted mixing at mergers.
  std::vector<double> inflow(n_junc, 0.0);
  std::vector<double> enthalpy(n_junc, 0.0);  // sum of mdot * T entering
  for (std::size_t i = 0; i < n_cons; ++i) {
    inflow[consumer_return_node_[i]] += s.consumer_flow[i];
    enthalpy[consumer_return_node_[i]] += s.consumer_flow[i] * consumers[i].return_setpoint;
  }
  for (auto p : return_order_) {
    const std::size_t up = pipe_up_[p];
    s.junction_temperature[up] = enthalpy[up] / inflow[up];
    const auto r = pipe_outlet_temperature(s.junction_temperature[up], t_amb, s.pipe_flow[p], *pipes_[p], fluid_);
    s.pipe_heat_loss[p] = r.heat_loss;
    inflow[pipe_down_[p]] += s.pipe_flow[p];
    enthalpy[pipe_down_[p]] += s.pipe_flow[p] * r.outlet_temperature;
  }
  s.junction_temperature[return_node_] = enthalpy[return_node_] / inflow[return_node_];
  s.source_heat = s.source_flow * cp * (t_supply - s.junction_temperature[return_node_]);

  // Pressures: feed from the source setpoint; the return level is fixed by the
  // hydraulically critical consumer, the others throttle the surplus.
  for (std::size_t p = 0; p < n_pipes; ++p) {
    s.pipe_pressure_drop[p] = darcy_pressure_drop(s.pipe_flow[p], *pipes_[p], fluid_, opts.friction);
  }
  s.junction_pressure[supply_node_] = topology_.source.supply_pressure;
  for (auto p : feed_order_) s.junction_pressure[pipe_down_[p]] = s.junction_pressure[pipe_up_[p]] - s.pipe_pressure_drop[p];
  double return_level = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_cons; ++i) {
    s.valve_pressure_drop[i] = valve_pressure_drop(s.consumer_flow[i], topology_.valve(consumers[i].valve), fluid_);
    double p = s.junction_pressure[consumer_feed_node_[i]] - s.valve_pressure_drop[i];
    for (auto rp : consumer_return_path_[i]) p -= s.pipe_pressure_drop[rp];
    return_level = std::min(return_level, p);
  }
  s.junction_pressure[return_node_] = return_level;
  for (auto it_p = return_order_.rbegin(); it_p != return_order_.rend(); ++it_p) {
    const auto p = *it_p;
    s.junction_pressure[pipe_up_[p]] = s.junction_pressure[pipe_down_[p]] + s.pipe_pressure_drop[p];
  }

  // Continuity residual at every junction (consumer valves and the source count as branches).
  std::vector<double> balance(n_junc, 0.0);
  for (std::size_t p = 0; p < n_pipes; ++p) {
    balance[pipe_up_[p]] -= s.pipe_flow[p];
    balance[pipe_down_[p]] += s.pipe_flow[p];
  }
  for (std::size_t i = 0; i < n_cons; ++i) {
    balance[consumer_feed_node_[i]] -= s.consumer_flow[i];
    balance[consumer_return_node_[i]] += s.consumer_flow[i];
  }
  balance[supply_node_] += s.source_flow;
  balance[return_node_] -= s.source_flow;
  for (double b : balance) s.max_continuity_residual = std::max(s.max_continuity_residual, std::abs(b) / s.source_flow);

  for (std::size_t j = 0; j < n_junc; ++j) {
    const auto& id = topology_.junctions[j].id;
    const double p = s.junction_pressure[j];
    const double t = s.junction_temperature[j];
    if (p < opts.pressure_band_min || p > opts.pressure_band_max) {
      s.warnings.push_back("pressure at " + id + " outside plausibility band: " + std::to_string(p) + " Pa");
    }
    if (t < opts.temperature_band_min || t > opts.temperature_band_max) {
      s.warnings.push_back("temperature at " + id + " outside plausibility band: " + std::to_string(t) + " degC");
    }
  }
  return s;
}

SteadyState solve_steady_state(const NetworkTopology& topology, const std::vector<double>& demands_kw,
                               const FluidProps& fluid, double t_amb, const SteadyStateOptions& opts) {
  return NetworkModel(topology, fluid).solve(demands_kw, t_amb, opts);
}

SimulationRun simulate(const NetworkTopology& topology, const WeatherSeries& weather, const FluidProps& fluid,
                       const DatasetOptions& opts) {
  const NetworkModel model(topology, fluid);
  const auto demands = demands_from_weather(weather, topology.consumers, opts.demand_law);
  const std::size_t hours = weather.hours();
  const std::size_t n_cons = topology.consumers.size();

  SimulationRun run;
  run.states.reserve(hours);
  std::vector<double> hour_demand(n_cons);
  for (std::size_t h = 0; h < hours; ++h) {
    for (std::size_t i = 0; i < n_cons; ++i) hour_demand[i] = demands[i][h];
    try {
      run.states.push_back(model.solve(hour_demand, weather.ambient[h], opts.steady));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("hour " + std::to_string(h) + ": " + e.what(), e.residual());
    } catch (const DomainError& e) {
      throw DomainError("hour " + std::to_string(h) + ": " + e.what());
    }
  }

  std::vector<std::int64_t> time(hours);
  for (std::size_t h = 0; h < hours; ++h) time[h] = static_cast<std::int64_t>(h);
  SensorTable table(std::move(time));
  auto column = [&](auto&& value_of) {
    std::vector<double> v(hours);
    for (std::size_t h = 0; h < hours; ++h) v[h] = value_of(run.states[h], h);
    return v;
  };
  const auto& sensors = topology.sensors;
  for (const auto& id : sensors.mass_flow) {
    const auto p = model.pipe_index(id);
    table.add_column({SensorKind::mass_flow, id, default_unit(SensorKind::mass_flow)},
                     column([p](const SteadyState& s, std::size_t) { return s.pipe_flow[p]; }));
  }
  for (const auto& id : sensors.pressure) {
    const auto j = model.junction_index(id);
    table.add_column({SensorKind::pressure, id, default_unit(SensorKind::pressure)},
                     column([j](const SteadyState& s, std::size_t) { return s.junction_pressure[j]; }));
  }
  for (const auto& id : sensors.temperature) {
    const auto j = model.junction_index(id);
    table.add_column({SensorKind::temperature, id, default_unit(SensorKind::temperature)},
                     column([j](const SteadyState& s, std::size_t) { return s.junction_temperature[j]; }));
  }
  table.add_column({SensorKind::ambient, "site", default_unit(SensorKind::ambient)}, weather.ambient);
  for (std::size_t i = 0; i < n_cons; ++i) {
    table.add_column({SensorKind::demand, topology.consumers[i].id, default_unit(SensorKind::demand)}, demands[i]);
  }
  run.table = std::move(table);
  return run;
}

SensorTable generate_dataset(const NetworkTopology& topology, const WeatherSeries& weather, const FluidProps& fluid,
                             const DatasetOptions& opts) {
  return simulate(topology, weather, fluid, opts).table;
}

}  // namespace dhsense
