#include <benchmark/benchmark.h>

#include "dhsense/augment.hpp"
#include "dhsense/hydraulics.hpp"
#include "dhsense/simulator.hpp"
#include "dhsense/topology.hpp"
#include "dhsense/weather.hpp"

using namespace dhsense;

namespace {

void BM_FrictionFactor(benchmark::State& state) {
  double re = 4e3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(friction_factor(re, 5e-4, 0.0313));
    re = re > 1e8 ? 4e3 : re * 1.37;
  }
}

void BM_SimulateHours(benchmark::State& state) {
  const auto topo = default_topology();
  const auto weather = synthesize_weather(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(topo, weather, FluidProps{}).rows());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AugmentPhysics(benchmark::State& state) {
  const auto topo = default_topology();
  const auto table = generate_dataset(topo, synthesize_weather(static_cast<std::size_t>(state.range(0)), 1), FluidProps{});
  const auto map = derive_augmentation_map(topo);
  for (auto _ : state) benchmark::DoNotOptimize(augment_physics(table, topo, FluidProps{}, map).rows());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_FrictionFactor);
BENCHMARK(BM_SimulateHours)->Arg(8760)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AugmentPhysics)->Arg(8760)->Unit(benchmark::kMillisecond);
