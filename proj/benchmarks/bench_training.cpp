#include <benchmark/benchmark.h>

#include "stegamark/config.hpp"
#include "stegamark/trainer.hpp"

using namespace stegamark;

// One optimizer step of the desk-scale preset on random images.
static void BM_TrainStepToy(benchmark::State& state) {
  auto cfg = toy_config().train;
  cfg.model.norm = static_cast<NormMode>(state.range(0));
  auto st = TrainState::create(cfg);
  st.step = cfg.perturb.ramp_steps;  // full-strength perturbations
  torch::manual_seed(1);
  Batch batch{torch::rand({cfg.batch_size, 3, 64, 64}),
              torch::randint(0, 2, {cfg.batch_size, cfg.model.n_bits}).to(torch::kFloat32)};
  const auto perceptual = make_perceptual_backend("pyramid");
  for (auto _ : state) {
    auto row = train_step(st, batch, *perceptual);
    benchmark::DoNotOptimize(row.loss);
  }
  state.SetLabel(std::string(to_string(cfg.model.norm)));
}
BENCHMARK(BM_TrainStepToy)
    ->Arg(static_cast<int>(NormMode::none))
    ->Arg(static_cast<int>(NormMode::instance))
    ->Unit(benchmark::kMillisecond);
