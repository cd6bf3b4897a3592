#pragma once

// Steady incompressible pipe-flow relations used by both the network
// simulator and the feature augmentation stage. All functions are pure.

#include <optional>
#include <string>

namespace dhsense {

struct FluidProps {
  double density = 980.0;          // kg/m^3
  double viscosity = 4.0e-4;       // Pa*s
  double heat_capacity = 4.18;     // kJ/(kg*K)
  double gravity = 9.81;           // m/s^2
  double specific_gravity = 1.0;   // -

  void validate() const;
};

struct PipeSpec {
  std::string id;
  double diameter = 0.0;   // m
  double length = 0.0;     // m
  double roughness = 0.0;  // m (absolute)
  double heat_transfer = 0.0;  // W/K, area independent
  std::string upstream;
  std::string downstream;

  void validate() const;
  double cross_section() const;
};

struct ValveSpec {
  std::string id;
  double flow_coefficient = 0.0;  // zeta
  std::string upstream;
  std::string downstream;

  void validate() const;
};

struct FlowState {
  double mass_flow = 0.0;  // kg/s
  double reynolds = 0.0;
  double velocity = 0.0;   // m/s
};

struct FrictionOptions {
  double laminar_reynolds = 2300.0;
  double tol = 1e-12;
  int max_iter = 200;
};

double flow_velocity(double mdot, const PipeSpec& pipe, const FluidProps& fluid);
double reynolds(double mdot, const PipeSpec& pipe, const FluidProps& fluid);
FlowState flow_state(double mdot, const PipeSpec& pipe, const FluidProps& fluid);

/// Darcy friction factor. Laminar: 64/Re. Turbulent: Colebrook-White solved
/// for x = 1/sqrt(lambda) by damped fixed-point iteration, with a bisection
/// fallback on the (monotone) residual.
double friction_factor(double re, double roughness, double diameter, const FrictionOptions& opts = {});

/// Residual of the Colebrook-White equation at lambda:
/// 1/sqrt(lambda) + 2 log10(ks/(3.7 D) + 2.51/(Re sqrt(lambda))).
double colebrook_residual(double lambda, double re, double roughness, double diameter);

/// |dP| = lambda L 8 mdot^2 / (rho pi^2 D^5), in Pa. `friction_override` pins lambda.
double darcy_pressure_drop(double mdot, const PipeSpec& pipe, const FluidProps& fluid,
                           const FrictionOptions& opts = {},
                           std::optional<double> friction_override = std::nullopt);

/// 10.67 L Q^1.852 / (C^1.852 D^4.87). Alternative to Darcy-Weisbach; unused by the pipeline.
double hazen_williams_drop(double volume_flow, double length, double roughness_coefficient, double diameter);

/// G mdot^2 / (rho zeta)^2, taken literally.
double valve_pressure_drop(double mdot, const ValveSpec& valve, const FluidProps& fluid);

/// |q / (mdot Cp)| with q in kW and Cp in kJ/(kg K); throws DomainError on zero flow.
double temperature_drop_from_heat(double heat_kw, double mdot, const FluidProps& fluid);

struct PipeThermalResult {
  double outlet_temperature = 0.0;  // degC
  double heat_loss = 0.0;           // kW, mdot Cp (T_in - T_out)
};

/// Exact steady solution of a constant-coefficient loss to ambient:
/// T_out = T_amb + (T_in - T_amb) exp(-ka / (mdot Cp 1000)).
PipeThermalResult pipe_outlet_temperature(double t_in, double t_amb, double mdot, const PipeSpec& pipe,
                                          const FluidProps& fluid);

}  // namespace dhsense
