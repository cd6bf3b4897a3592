#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "dhsense/error.hpp"
#include "dhsense/simulator.hpp"
#include "dhsense/topology.hpp"
#include "dhsense/weather.hpp"

using namespace dhsense;

namespace {

double bisection_lambda(double re, double ks, double d) {
  auto f = [&](double x) { return x + 2.0 * std::log10(ks / (3.7 * d) + 2.51 * x / re); };
  double lo = 1e-3, hi = 1e3;
  for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? hi : lo) = mid;
  }
  const double x = 0.5 * (lo + hi);
  return 1.0 / (x * x);
}

double chain_drop(double mdot, const PipeSpec& p, const FluidProps& w) {
  const double re = 4 * mdot / (std::numbers::pi * p.diameter * w.viscosity);
  const double lam = re <= 2300 ? 64 / re : bisection_lambda(re, p.roughness, p.diameter);
  return lam * p.length * 8 * mdot * mdot / (w.density * std::numbers::pi * std::numbers::pi * std::pow(p.diameter, 5));
}

NetworkTopology single_consumer() {
  NetworkTopology t;
  t.junctions = {{"SF", 0}, {"CA_f", 0}, {"CA_r", 0}, {"SR", 0}};
  t.feed_pipes = {{"FP0", 0.0313, 60, 0.0005, 0.0, "SF", "CA_f"}};
  t.return_pipes = {{"RP0", 0.0182, 60, 0.0005, 0.0, "CA_r", "SR"}};
  t.valves = {{"VA", 6e-7, "CA_f", "CA_r"}};
  t.consumers = {{"A", 4.0, 60.0, 1.0, "VA"}};
  t.source = {"SF", "SR", 90.0, 500e3};
  t.sensors.mass_flow = {"FP0"};
  t.sensors.pressure = {"CA_f", "CA_r", "SR"};
  t.sensors.temperature = {"CA_f", "SR"};
  return t;
}

// Default layout with mirrored branch geometry so all four consumers see the same hydraulics.
NetworkTopology symmetric_network() {
  auto t = default_topology();
  for (auto* group : {&t.feed_pipes, &t.return_pipes}) {
    for (auto& p : *group) {
      const bool trunk = p.id.back() == '0';
      const bool main = p.id.back() == '1' || p.id.back() == '4';
      p.diameter = trunk ? 0.0313 : main ? 0.0276 : 0.0175;
      p.length = trunk ? 60 : main ? 120 : 20;
      p.heat_transfer = 3.0;
    }
  }
  for (auto& c : t.consumers) c.area = 5.0;
  return t;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("weather synthesis") {
  const auto a = synthesize_weather(500, 7);
  const auto b = synthesize_weather(500, 7);
  CHECK(a.ambient == b.ambient);
  CHECK(synthesize_weather(500, 8).ambient != a.ambient);
  CHECK(synthesize_weather(8760, 1).hours() == 8760);
  CHECK_THROWS_AS(synthesize_weather(0, 1), ConfigError);

  WeatherProfile clean;
  clean.noise_std = 0.0;
  const auto s = synthesize_weather(8760, 3, clean);
  const double two_pi = 2 * std::numbers::pi;
  for (std::size_t h = 0; h < s.hours(); h += 37) {
    const double expected = 8.0 - 12.0 * std::cos(two_pi * (h - 400.0) / 8760.0) - 4.0 * std::cos(two_pi * (h - 4.0) / 24.0);
    CHECK(s.ambient[h] == doctest::Approx(expected).epsilon(1e-12));
  }
  for (double v : synthesize_weather(8760, 11).ambient) {
    CHECK(v >= -15.0);
    CHECK(v <= 35.0);
  }
}

TEST_CASE("demand law") {
  ConsumerSpec a{"A", 200.0, 60.0, 1.0, "VA"};
  ConsumerSpec b{"B", 400.0, 60.0, 1.0, "VB"};
  CHECK(demand_at(0.0, a, {}) == doctest::Approx(0.05 * 200 * 18).epsilon(1e-15));
  CHECK(demand_at(18.0, a, {}) == 1.0);
  CHECK(demand_at(30.0, a, {}) == 1.0);
  CHECK(demand_at(-3.0, b, {}) == doctest::Approx(2 * demand_at(-3.0, a, {})).epsilon(1e-15));

  WeatherSeries flat;
  flat.ambient.assign(24, 18.0);
  for (const auto& series : demands_from_weather(flat, {a, b})) {
    for (double q : series) CHECK(q == 1.0);
  }
  double prev = 1e300;
  for (double t = -15; t < 18; t += 0.5) {
    const double q = demand_at(t, a, {});
    CHECK(q < prev);
    prev = q;
  }
}

TEST_CASE("single consumer chain") {
  const auto t = single_consumer();
  FluidProps w;
  const double q = 20.0;
  const auto s = solve_steady_state(t, {q}, w, 5.0);
  const double mdot = q / (4.18 * (90.0 - 60.0));
  CHECK(s.consumer_flow[0] == doctest::Approx(mdot).epsilon(1e-15));
  CHECK(s.pipe_flow[0] == doctest::Approx(mdot).epsilon(1e-15));
  CHECK(s.pipe_flow[1] == doctest::Approx(mdot).epsilon(1e-15));

  NetworkModel model(t, w);
  const double p_feed = 500e3 - chain_drop(mdot, t.feed_pipes[0], w);
  const double valve = 1.0 * mdot * mdot / std::pow(980.0 * 6e-7, 2);
  const double p_return_source = p_feed - valve - chain_drop(mdot, t.return_pipes[0], w);
  CHECK(s.junction_pressure[model.junction_index("SF")] == 500e3);
  CHECK(s.junction_pressure[model.junction_index("CA_f")] == doctest::Approx(p_feed).epsilon(1e-10));
  CHECK(s.junction_pressure[model.junction_index("SR")] == doctest::Approx(p_return_source).epsilon(1e-10));
  CHECK(s.junction_pressure[model.junction_index("CA_r")] == doctest::Approx(p_feed - valve).epsilon(1e-10));
  CHECK(s.junction_temperature[model.junction_index("SR")] == doctest::Approx(60.0).epsilon(1e-14));
  CHECK(s.energy_closure() < 1e-12);
}

TEST_CASE("symmetric network splits evenly") {
  const auto t = symmetric_network();
  const auto s = solve_steady_state(t, {12.0, 12.0, 12.0, 12.0}, FluidProps{}, 0.0);
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(s.consumer_flow[i] - s.consumer_flow[0]) < 1e-12);
  NetworkModel m(t);
  CHECK(std::abs(s.pipe_flow[m.pipe_index("FP1")] - s.pipe_flow[m.pipe_index("FP4")]) < 1e-12);
  CHECK(std::abs(s.pipe_flow[m.pipe_index("RP1")] - s.pipe_flow[m.pipe_index("RP4")]) < 1e-12);
}

TEST_CASE("flows scale with demand when pipes are lossless") {
  auto t = default_topology();
  for (auto* group : {&t.feed_pipes, &t.return_pipes}) {
    for (auto& p : *group) p.heat_transfer = 0.0;
  }
  const auto a = solve_steady_state(t, {5, 7, 9, 11}, FluidProps{}, 0.0);
  const auto b = solve_steady_state(t, {10, 14, 18, 22}, FluidProps{}, 0.0);
  for (std::size_t p = 0; p < a.pipe_flow.size(); ++p) {
    CHECK(b.pipe_flow[p] == doctest::Approx(2 * a.pipe_flow[p]).epsilon(1e-14));
  }
}

TEST_CASE("conservation, closure and monotonicity over a season") {
  const auto t = default_topology();
  const auto run = simulate(t, synthesize_weather(600, 2023), FluidProps{});
  NetworkModel m(t);
  for (std::size_t h = 0; h < run.states.size(); ++h) {
    const auto& s = run.states[h];
    CHECK(s.max_continuity_residual < 1e-9);
    CHECK(s.energy_closure() < 1e-6);
    for (const auto& p : t.feed_pipes) {
      const auto up = m.junction_index(p.upstream), down = m.junction_index(p.downstream);
      CHECK(s.junction_pressure[down] <= s.junction_pressure[up]);
      CHECK(s.junction_temperature[down] <= s.junction_temperature[up]);
    }
    for (double p : s.junction_pressure) {
      CHECK(p >= 300e3);
      CHECK(p <= 500e3);
    }
    for (double temp : s.junction_temperature) {
      CHECK(temp >= 50.0);
      CHECK(temp <= 90.0);
    }
  }
}

TEST_CASE("solver errors") {
  const auto t = default_topology();
  CHECK_THROWS_AS(solve_steady_state(t, {5, 5, 5}, FluidProps{}, 0.0), ConfigError);
  CHECK_THROWS_AS(solve_steady_state(t, {0.5, 5, 5, 5}, FluidProps{}, 0.0), ConfigError);
  SteadyStateOptions o;
  o.max_iter = 1;
  CHECK_THROWS_AS(solve_steady_state(t, {5, 5, 5, 5}, FluidProps{}, 0.0, o), ConvergenceError);

  // Heavy losses push the consumer inlet below its return setpoint.
  auto cold = single_consumer();
  cold.feed_pipes[0].heat_transfer = 5000.0;
  CHECK_THROWS_AS(solve_steady_state(cold, {1.0}, FluidProps{}, -10.0), DomainError);
}

TEST_CASE("topology validation and file round trip") {
  const auto t = default_topology();
  CHECK_NOTHROW(t.validate());
  CHECK(t.feed_pipes.size() == 7);
  CHECK(t.return_pipes.size() == 7);
  CHECK(t.pipe("FP0").diameter == doctest::Approx(0.0313));
  CHECK(t.pipe("RP6").heat_transfer == doctest::Approx(4.04));

  const auto back = topology_from_string(topology_to_string(t));
  CHECK(topology_to_string(back) == topology_to_string(t));
  for (const auto* p : t.all_pipes()) {
    CHECK(back.pipe(p->id).diameter == doctest::Approx(p->diameter).epsilon(1e-15));
    CHECK(back.pipe(p->id).length == p->length);
  }

  auto bad = t;
  bad.feed_pipes.push_back(bad.feed_pipes[0]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.consumers[0].return_setpoint = 95.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.feed_pipes[1].downstream = "JR2";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("shipped topology file equals the built-in network") {
  const auto shipped = load_topology(std::filesystem::path(DHSENSE_DATA_DIR) / "default_topology.json");
  CHECK(topology_to_string(shipped) == topology_to_string(default_topology()));
}

TEST_CASE("dataset is deterministic") {
  const auto t = default_topology();
  const auto w = synthesize_weather(48, 5);
  const auto a = generate_dataset(t, w, FluidProps{});
  CHECK(a.rows() == 48);
  CHECK(table_to_string(a) == table_to_string(generate_dataset(t, w, FluidProps{})));
}

}
