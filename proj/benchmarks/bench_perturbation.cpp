#include <benchmark/benchmark.h>

#include "stegamark/perturbation.hpp"
#include "stegamark/robustness_eval.hpp"

using namespace stegamark;

namespace {

PerturbConfig toy_perturb() {
  PerturbConfig c;
  c.max_corner_shift = 3.2;
  c.blur_kernel = 3.0;
  c.defocus_sigma_max = 1.0;
  return c;
}

}  // namespace

static void BM_PerturbPipeline(benchmark::State& state) {
  torch::manual_seed(0);
  const auto side = state.range(0);
  auto imgs = torch::rand({8, 3, side, side});
  const auto cfg = toy_perturb();
  Rng rng(1);
  for (auto _ : state) {
    auto out = perturb_pipeline(imgs, 1.0, cfg, rng);
    benchmark::DoNotOptimize(out.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_PerturbPipeline)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_WarpHomography(benchmark::State& state) {
  torch::manual_seed(0);
  auto img = torch::rand({1, 3, 400, 400});
  const auto h = corner_homography({400, 400}, {12, -8, 5, 3, -15, 9, 4, -6});
  for (auto _ : state) {
    auto out = warp_homography(img, h);
    benchmark::DoNotOptimize(out.data_ptr());
  }
}
BENCHMARK(BM_WarpHomography)->Unit(benchmark::kMillisecond);

static void BM_MotionBlur(benchmark::State& state) {
  torch::manual_seed(0);
  auto img = torch::rand({1, 3, 400, 400});
  const auto length = static_cast<double>(state.range(0));
  for (auto _ : state) {
    auto out = motion_blur(img, length, 0.7);
    benchmark::DoNotOptimize(out.data_ptr());
  }
}
BENCHMARK(BM_MotionBlur)->Arg(3)->Arg(7)->Unit(benchmark::kMillisecond);

static void BM_OneBitDither(benchmark::State& state) {
  torch::manual_seed(0);
  auto img = torch::rand({1, 3, 400, 400});
  for (auto _ : state) {
    auto out = one_bit_dither(img);
    benchmark::DoNotOptimize(out.data_ptr());
  }
}
BENCHMARK(BM_OneBitDither)->Unit(benchmark::kMillisecond);
