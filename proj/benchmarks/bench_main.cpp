#include <benchmark/benchmark.h>

#include <numeric>

#include "nsarm/ar_model.hpp"
#include "nsarm/autograd.hpp"
#include "nsarm/bsq.hpp"
#include "nsarm/gemm.hpp"
#include "nsarm/residual_codec.hpp"
#include "nsarm/rng.hpp"
#include "nsarm/scale_schedule.hpp"

using namespace nsarm;

namespace {

Tensor randn(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = randn({n, n}, rng), b = randn({n, n}, rng);
  Tensor c({n, n});
  for (auto _ : state) {
    gemm<float>(false, false, n, n, n, 1.0f, a.ptr(), n, b.ptr(), n, 0.0f, c.ptr(), n);
    benchmark::DoNotOptimize(c.ptr());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * static_cast<double>(n * n * n), benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

// Desk AR sequence: 521 tokens in 7 blocks, model width 128, 4 heads.
void BM_BlockCausalAttention(benchmark::State& state) {
  const ScaleSchedule s = infinity_default_schedule(64);
  std::vector<std::size_t> ends;
  std::size_t total = 0;
  for (const Extent& e : s.scales) ends.push_back(total += e.h * e.w);
  const std::size_t B = static_cast<std::size_t>(state.range(0)), D = 128;
  Rng rng(2);
  Var<float> qkv = parameter(randn({B, total, 3 * D}, rng));
  const bool with_backward = state.range(1) != 0;
  for (auto _ : state) {
    Var<float> out = ag::block_causal_attention(qkv, 4, ends);
    if (with_backward) {
      qkv.zero_grad();
      backward(ag::sum(out));
    }
    benchmark::DoNotOptimize(out.value().ptr());
  }
}
BENCHMARK(BM_BlockCausalAttention)->Args({1, 0})->Args({8, 0})->Args({8, 1})->Unit(benchmark::kMillisecond);

void BM_Conv2d(benchmark::State& state) {
  const auto C = static_cast<std::size_t>(state.range(0));
  const std::size_t B = 8, H = 64;
  Rng rng(3);
  Var<float> x = parameter(randn({B, H, H, C}, rng));
  const Var<float> w = parameter(randn({3, 3, C, C}, rng));
  const Var<float> b = parameter(randn({C}, rng));
  const bool with_backward = state.range(1) != 0;
  for (auto _ : state) {
    Var<float> y = ag::conv2d(x, w, b, 1, 1);
    if (with_backward) {
      x.zero_grad();
      backward(ag::sum(y));
    }
    benchmark::DoNotOptimize(y.value().ptr());
  }
}
BENCHMARK(BM_Conv2d)->Args({16, 0})->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_Decompose(benchmark::State& state) {
  const ScaleSchedule s = infinity_default_schedule(static_cast<int>(state.range(0)));
  const Extent last = s.last();
  Rng rng(4);
  const Tensor f = randn({last.h, last.w, s.latent_dim}, rng);
  const Quantizer q = bsq_quantizer();
  for (auto _ : state) {
    ResidualQueue queue = decompose(f, s, q);
    benchmark::DoNotOptimize(queue.residuals.back().ptr());
  }
}
BENCHMARK(BM_Decompose)->Arg(64)->Arg(1024)->Unit(benchmark::kMicrosecond);

void BM_BsqQuantize(benchmark::State& state) {
  Rng rng(5);
  const Tensor r = randn({64, 64, 16}, rng);
  for (auto _ : state) {
    bsq::Quantized q = bsq::quantize(r);
    benchmark::DoNotOptimize(q.values.ptr());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 64);
}
BENCHMARK(BM_BsqQuantize);

}  // namespace

BENCHMARK_MAIN();
