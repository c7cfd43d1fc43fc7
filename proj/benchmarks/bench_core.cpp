// Copyright 2026 the cosmic authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "cosmic/diffusion.hpp"
#include "cosmic/entropy.hpp"
#include "cosmic/flops.hpp"
#include "cosmic/metrics.hpp"
#include "cosmic/model.hpp"

using namespace cosmic;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  t.fill_uniform(rng, lo, hi);
  return t;
}

void BM_Conv2dStride2(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x = random_tensor({c, 64, 64}, 1);
  Tensor w = random_tensor({c, c, 5, 5}, 2, -0.05f, 0.05f);
  Tensor b = random_tensor({c}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_fwd(x, w, b, ConvGeom::same(2, 2)));
  }
  state.SetItemsProcessed(state.iterations() * conv_macs(c, 32, 32, c, 5, 5));
}
BENCHMARK(BM_Conv2dStride2)->Arg(32)->Arg(96)->Arg(192);

void BM_DepthwiseConv(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x = random_tensor({c, 128, 128}, 4);
  Tensor w = random_tensor({c, 1, 5, 5}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_fwd(x, w, Tensor(), ConvGeom{1, 2, 2, c}));
  }
}
BENCHMARK(BM_DepthwiseConv)->Arg(96)->Arg(192);

void BM_Gdn(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Tensor x = random_tensor({c, 32, 32}, 6);
  Tensor beta = random_tensor({c}, 7, 0.5f, 1.5f);
  Tensor gamma = random_tensor({c, c}, 8, 0.0f, 0.1f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gdn_fwd(x, beta, gamma, false));
  }
}
BENCHMARK(BM_Gdn)->Arg(64)->Arg(192);

void BM_EncoderForward256(benchmark::State& state) {
  CodecConfig cfg;
  Rng rng(9);
  EncoderNet enc = EncoderNet::make(cfg, rng);
  Tensor img = random_tensor({3, 256, 256}, 10, 0.0f, 1.0f);
  for (auto _ : state) {
    Graph g;
    Binder bind(g, false);
    benchmark::DoNotOptimize(g.value(enc.forward(bind, g.constant(img))));
  }
}
BENCHMARK(BM_EncoderForward256)->Unit(benchmark::kMillisecond);

void BM_RangeCoderRoundTrip(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(11);
  std::vector<SymbolDist> models(n);
  std::vector<int32_t> symbols(n);
  for (size_t i = 0; i < n; ++i) {
    models[i] = SymbolDist{rng.uniform(-5.0, 5.0), rng.uniform(0.2, 4.0), false};
    symbols[i] = static_cast<int32_t>(std::lround(models[i].center + models[i].spread * rng.normal()));
  }
  for (auto _ : state) {
    auto bytes = range_encode(symbols, models);
    benchmark::DoNotOptimize(range_decode(bytes, models));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_RangeCoderRoundTrip)->Arg(4096)->Arg(49152);

void BM_DdimStep(benchmark::State& state) {
  NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
  Tensor z = random_tensor({4, 64, 64}, 12);
  Tensor eps = random_tensor({4, 64, 64}, 13);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddim_step(z, 800, 760, eps, s));
  }
}
BENCHMARK(BM_DdimStep);

void BM_MsSsim(benchmark::State& state) {
  Tensor x = random_tensor({3, 256, 256}, 14, 0.0f, 1.0f);
  Tensor y = random_tensor({3, 256, 256}, 15, 0.0f, 1.0f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ms_ssim(x, y, 1.0));
  }
  state.SetLabel("256x256 rgb, 5 scales");
}
BENCHMARK(BM_MsSsim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
