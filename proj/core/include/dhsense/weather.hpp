#pragma once

#include <cstdint>
#include <vector>

#include "dhsense/topology.hpp"

namespace dhsense {

/// Synthetic hourly outdoor temperature: annual + daily cosine with seeded
/// Gaussian perturbation, clipped to [min_temperature, max_temperature].
struct WeatherProfile {
  double mean = 8.0;                 // degC
  double annual_amplitude = 12.0;    // K
  double annual_coldest_hour = 400;  // mid January
  double daily_amplitude = 4.0;      // K
  double daily_coldest_hour = 4.0;   // 04:00
  double noise_std = 1.5;            // K
  double min_temperature = -15.0;
  double max_temperature = 35.0;

  /// Noise-free value at hour h (before clipping).
  double deterministic(double hour) const;
};

struct WeatherSeries {
  std::vector<double> ambient;  // degC, one per hour
  std::uint64_t seed = 0;

  std::size_t hours() const { return ambient.size(); }
};

WeatherSeries synthesize_weather(std::size_t hours, std::uint64_t seed, const WeatherProfile& profile = {});

struct DemandLaw {
  double reference_temperature = 18.0;  // degC
  double coefficient = 0.05;            // kW/(m^2 K)
};

/// q_i(h) = max(c area_i (T_ref - T_amb(h)), q_min_i). Outer index: consumer.
std::vector<std::vector<double>> demands_from_weather(const WeatherSeries& weather,
                                                      const std::vector<ConsumerSpec>& consumers,
                                                      const DemandLaw& law = {});

double demand_at(double ambient, const ConsumerSpec& consumer, const DemandLaw& law);

}  // namespace dhsense
