#include <benchmark/benchmark.h>

#include <random>

#include "dhsense/experiment.hpp"
#include "dhsense/model.hpp"
#include "dhsense/ops.hpp"
#include "dhsense/train.hpp"

using namespace dhsense;

namespace {

// One training batch shaped like the physics-enhanced default: 64 windows of
// 37 nodes x 8 steps, adjacency from the same kernel the pipeline uses.
const BatchedGraph& sample_batch() {
  static const BatchedGraph batch = [] {
    ExperimentConfig cfg;
    cfg.rows = 200;
    const auto data = prepare_scenario(cfg);
    const auto v = prepare_variant(data, Variant::physics_enhanced, cfg, true);
    return make_batches(v.samples, 0, 64, 64).front();
  }();
  return batch;
}

void run_step(benchmark::State& state, Architecture arch) {
  ModelConfig mc;
  mc.architecture = arch;
  const auto& batch = sample_batch();
  const auto prepared = prepare_batch(batch, mc);
  Model model(mc, batch.nodes_per_sample, static_cast<std::size_t>(batch.y.cols()));
  for (auto _ : state) {
    const Var loss = mse_loss(model.forward(prepared), prepared.y);
    backward(loss);
    benchmark::DoNotOptimize(loss.value().data[0]);
    for (const auto& p : model.parameters()) const_cast<Var&>(p).zero_grad();
  }
}

void run_forward(benchmark::State& state, Architecture arch) {
  ModelConfig mc;
  mc.architecture = arch;
  const auto& batch = sample_batch();
  const auto prepared = prepare_batch(batch, mc);
  Model model(mc, batch.nodes_per_sample, static_cast<std::size_t>(batch.y.cols()));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(prepared).value().data[0]);
}

void BM_TrainStep(benchmark::State& state) { run_step(state, static_cast<Architecture>(state.range(0))); }
void BM_Forward(benchmark::State& state) { run_forward(state, static_cast<Architecture>(state.range(0))); }

void BM_PrepareBatch(benchmark::State& state) {
  ModelConfig mc;
  mc.architecture = static_cast<Architecture>(state.range(0));
  const auto& batch = sample_batch();
  for (auto _ : state) benchmark::DoNotOptimize(prepare_batch(batch, mc).samples);
}

void BM_ReadoutMatmul(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  Var x = parameter(glorot_uniform({64, n}, n, 128, rng));
  Var w = parameter(glorot_uniform({n, 128}, n, 128, rng));
  for (auto _ : state) {
    const Var y = sum(matmul(x, w));
    backward(y);
    x.zero_grad();
    w.zero_grad();
  }
}

void arch_args(benchmark::internal::Benchmark* b) {
  for (auto a : all_architectures()) b->Arg(static_cast<int>(a));
}

}  // namespace

BENCHMARK(BM_TrainStep)->Apply(arch_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Apply(arch_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrepareBatch)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReadoutMatmul)->Arg(3552)->Arg(9472)->Unit(benchmark::kMillisecond);
