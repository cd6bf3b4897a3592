#include "dhsense/hydraulics.hpp"

#include <cmath>
#include <numbers>

#include "dhsense/error.hpp"

namespace dhsense {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

void FluidProps::validate() const {
  require(density > 0 && viscosity > 0 && heat_capacity > 0 && gravity > 0 && specific_gravity > 0,
          "fluid properties must be strictly positive");
  require(specific_gravity >= 0.9 && specific_gravity <= 1.1, "specific gravity outside [0.9, 1.1]");
}

void PipeSpec::validate() const {
  require(diameter > 0, "pipe " + id + ": diameter must be positive");
  require(length > 0, "pipe " + id + ": length must be positive");
  require(roughness >= 0, "pipe " + id + ": roughness must be non-negative");
  require(heat_transfer >= 0, "pipe " + id + ": heat transfer coefficient must be non-negative");
  require(roughness < diameter, "pipe " + id + ": roughness must be smaller than diameter");
}

double PipeSpec::cross_section() const { return kPi * diameter * diameter / 4.0; }

void ValveSpec::validate() const {
  require(flow_coefficient > 0, "valve " + id + ": flow coefficient must be positive");
}

double flow_velocity(double mdot, const PipeSpec& pipe, const FluidProps& fluid) {
  return mdot / (fluid.density * pipe.cross_section());
}

double reynolds(double mdot, const PipeSpec& pipe, const FluidProps& fluid) {
  return 4.0 * std::abs(mdot) / (kPi * pipe.diameter * fluid.viscosity);
}

FlowState flow_state(double mdot, const PipeSpec& pipe, const FluidProps& fluid) {
  return {mdot, reynolds(mdot, pipe, fluid), flow_velocity(mdot, pipe, fluid)};
}

double colebrook_residual(double lambda, double re, double roughness, double diameter) {
  const double x = 1.0 / std::sqrt(lambda);
  return x + 2.0 * std::log10(roughness / (3.7 * diameter) + 2.51 * x / re);
}

double friction_factor(double re, double roughness, double diameter, const FrictionOptions& opts) {
  if (re <= 0.0) throw DomainError("no flow: friction factor undefined");
  if (re <= opts.laminar_reynolds) return 64.0 / re;

  const double a = roughness / (3.7 * diameter);
  const double b = 2.51 / re;
  // r(x) = x + 2 log10(a + b x), strictly increasing in x.
  auto residual = [&](double x) { return x + 2.0 * std::log10(a + b * x); };

  double x = 7.0;  // lambda ~ 0.02
  double r = residual(x);
  double damping = 1.0;
  for (int it = 0; it < opts.max_iter && std::abs(r) >= opts.tol; ++it) {
    const double next = x - damping * r;
    const double r_next = next > 0 ? residual(next) : INFINITY;
    if (std::abs(r_next) < std::abs(r)) {
      x = next;
      r = r_next;
    } else {
      damping *= 0.5;
      if (damping < 1e-6) break;
    }
  }
  if (std::abs(r) < opts.tol) return 1.0 / (x * x);

  double lo = 1e-3;
  double hi = 1e3;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    r = residual(mid);
    if (std::abs(r) < opts.tol) return 1.0 / (mid * mid);
    (r > 0 ? hi : lo) = mid;
  }
  throw ConvergenceError("Colebrook-White iteration did not converge", r);
}

double darcy_pressure_drop(double mdot, const PipeSpec& pipe, const FluidProps& fluid, const FrictionOptions& opts,
                           std::optional<double> friction_override) {
  if (mdot == 0.0) return 0.0;
  const double lambda = friction_override
                            ? *friction_override
                            : friction_factor(reynolds(mdot, pipe, fluid), pipe.roughness, pipe.diameter, opts);
  const double d5 = std::pow(pipe.diameter, 5);
  return std::abs(lambda * pipe.length * 8.0 * mdot * mdot / (fluid.density * kPi * kPi * d5));
}

double hazen_williams_drop(double volume_flow, double length, double roughness_coefficient, double diameter) {
  return 10.67 * length * std::pow(volume_flow, 1.852) /
         (std::pow(roughness_coefficient, 1.852) * std::pow(diameter, 4.87));
}

double valve_pressure_drop(double mdot, const ValveSpec& valve, const FluidProps& fluid) {
  const double denom = fluid.density * valve.flow_coefficient;
  return fluid.specific_gravity * mdot * mdot / (denom * denom);
}

double temperature_drop_from_heat(double heat_kw, double mdot, const FluidProps& fluid) {
  if (mdot == 0.0) throw DomainError("zero flow: temperature drop undefined");
  return std::abs(heat_kw / (mdot * fluid.heat_capacity));
}

PipeThermalResult pipe_outlet_temperature(double t_in, double t_amb, double mdot, const PipeSpec& pipe,
                                          const FluidProps& fluid) {
  if (mdot <= 0.0) throw DomainError("non-positive flow in thermal pipe model");
  const double capacity_rate = mdot * fluid.heat_capacity * 1000.0;  // W/K
  const double t_out = t_amb + (t_in - t_amb) * std::exp(-pipe.heat_transfer / capacity_rate);
  return {t_out, mdot * fluid.heat_capacity * (t_in - t_out)};
}

}  // namespace dhsense
