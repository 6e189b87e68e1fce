#include <benchmark/benchmark.h>

#include "stegamark/decoder.hpp"
#include "stegamark/encoder.hpp"
#include "stegamark/nn_core.hpp"

using namespace stegamark;

static void BM_InstanceNorm(benchmark::State& state) {
  torch::manual_seed(0);
  auto x = torch::randn({8, state.range(0), 64, 64});
  for (auto _ : state) {
    auto y = instance_norm(x);
    benchmark::DoNotOptimize(y.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_InstanceNorm)->Arg(8)->Arg(32);

static void BM_InstanceNormBackward(benchmark::State& state) {
  torch::manual_seed(0);
  auto x = torch::randn({8, 8, 64, 64}).requires_grad_(true);
  auto w = torch::randn({8, 8, 64, 64});
  for (auto _ : state) {
    x.mutable_grad() = torch::Tensor();
    (instance_norm(x) * w).sum().backward();
    benchmark::DoNotOptimize(x.grad().data_ptr());
  }
}
BENCHMARK(BM_InstanceNormBackward);

static void BM_EncodeToy(benchmark::State& state) {
  torch::manual_seed(0);
  EncoderOptions o;
  o.n_bits = 16;
  o.image = {64, 64};
  o.base_channels = 8;
  Encoder enc(o);
  auto img = torch::rand({8, 3, 64, 64});
  auto msg = torch::randint(0, 2, {8, 16}).to(torch::kFloat32);
  torch::NoGradGuard no_grad;
  for (auto _ : state) {
    auto r = enc->encode(img, msg, OutputMode::sigmoid);
    benchmark::DoNotOptimize(r.encoded.data_ptr());
  }
}
BENCHMARK(BM_EncodeToy)->Unit(benchmark::kMillisecond);

static void BM_DecodeToy(benchmark::State& state) {
  torch::manual_seed(0);
  DecoderOptions o;
  o.n_bits = 16;
  o.image = {64, 64};
  o.base_channels = 8;
  Decoder dec(o);
  auto img = torch::rand({8, 3, 64, 64});
  torch::NoGradGuard no_grad;
  for (auto _ : state) {
    auto logits = dec->decode(img);
    benchmark::DoNotOptimize(logits.data_ptr());
  }
}
BENCHMARK(BM_DecodeToy)->Unit(benchmark::kMillisecond);
