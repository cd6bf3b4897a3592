#include "dhsense/weather.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dhsense/error.hpp"

namespace dhsense {

double WeatherProfile::deterministic(double hour) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return mean - annual_amplitude * std::cos(two_pi * (hour - annual_coldest_hour) / 8760.0) -
         daily_amplitude * std::cos(two_pi * (hour - daily_coldest_hour) / 24.0);
}

WeatherSeries synthesize_weather(std::size_t hours, std::uint64_t seed, const WeatherProfile& profile) {
  if (hours == 0) throw ConfigError("weather series needs at least one hour");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  WeatherSeries series;
  series.seed = seed;
  series.ambient.resize(hours);
  for (std::size_t h = 0; h < hours; ++h) {
    const double eps = noise(rng);  // drawn even when noise_std == 0 so the stream is profile independent
    const double t = profile.deterministic(static_cast<double>(h)) + profile.noise_std * eps;
    series.ambient[h] = std::clamp(t, profile.min_temperature, profile.max_temperature);
  }
  return series;
}

double demand_at(double ambient, const ConsumerSpec& consumer, const DemandLaw& law) {
  return std::max(law.coefficient * consumer.area * (law.reference_temperature - ambient), consumer.min_demand);
}

std::vector<std::vector<double>> demands_from_weather(const WeatherSeries& weather,
                                                      const std::vector<ConsumerSpec>& consumers,
                                                      const DemandLaw& law) {
  std::vector<std::vector<double>> out(consumers.size(), std::vector<double>(weather.hours()));
  for (std::size_t i = 0; i < consumers.size(); ++i) {
    for (std::size_t h = 0; h < weather.hours(); ++h) out[i][h] = demand_at(weather.ambient[h], consumers[i], law);
  }
  return out;
}

}  // namespace dhsense
