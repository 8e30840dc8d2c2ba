// Library kernels (OpenMP) against the serial nested-loop references.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "reference.hpp"
#include "sca/attention.hpp"
#include "sca/losses.hpp"
#include "sca/matcher.hpp"
#include "sca/ops.hpp"
#include "sca/rng.hpp"

using namespace sca;

namespace {

constexpr int kC = 16, kH = 32, kW = 64;

struct Inputs {
  Tensor x, y, off, weight, bias, xq, xk;
  SCAParams p;
  Inputs() {
    Rng rng(1);
    x = rng.normal_tensor({kC, kH, kW});
    y = rng.normal_tensor({kC, kH, kW});
    off = rng.uniform_tensor({kH, kW}, -16, 0);
    weight = rng.normal_tensor({kC, kC, 3, 3});
    bias = rng.normal_tensor({kC});
    xq = rng.normal_tensor({2 * kC, kH, kW});
    xk = rng.normal_tensor({2 * kC, kH, kW});
    p = SCAParams{rng.normal_tensor({8, 2 * kC}, 0.2), rng.normal_tensor({8, 2 * kC}, 0.2), 8};
  }
};

const Inputs& inputs() {
  static const Inputs in;
  return in;
}

void BM_conv2d(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(conv2d(in.x, in.weight, in.bias, 1, 1));
}
void BM_conv2d_ref(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ref::conv2d(in.x, in.weight, in.bias, 1, 1));
}

void BM_conv2d_backward(benchmark::State& st) {
  const auto& in = inputs();
  Tensor w = in.weight.clone();
  w.set_requires_grad(true);
  Tensor x = in.x.clone();
  x.set_requires_grad(true);
  for (auto _ : st) {
    backward(sum(conv2d(x, w, in.bias, 1, 1)));
    w.zero_grad();
    x.zero_grad();
  }
}

void BM_warp(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(backward_warp(in.x, in.off));
}
void BM_warp_ref(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ref::warp(in.x, in.off));
}

void BM_correlation(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(correlation_1d(in.x, in.y, 16));
}
void BM_correlation_ref(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ref::correlation(in.x, in.y, 16));
}

void BM_sca(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(sca_cross_attend(in.x, in.xq, in.xk, in.p, AttendDirection::LeftToRight));
}
void BM_sca_ref(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ref::sca(in.x, in.xq, in.xk, in.p.w_query, in.p.w_key, 8, -1));
}

void BM_ssim(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ssim(in.x, in.y));
}
void BM_ssim_ref(benchmark::State& st) {
  const auto& in = inputs();
  for (auto _ : st) benchmark::DoNotOptimize(ref::ssim(in.x, in.y));
}

void BM_matcher_step(benchmark::State& st) {
  Rng rng(2);
  const Matcher e(MatcherConfig{}, rng);
  const Tensor l = rng.uniform_tensor({3, 64, 128}, 0, 1), r = rng.uniform_tensor({3, 64, 128}, 0, 1);
  for (auto _ : st) backward(mean(e.predict(l, r)));
}

}  // namespace

BENCHMARK(BM_conv2d);
BENCHMARK(BM_conv2d_ref);
BENCHMARK(BM_conv2d_backward);
BENCHMARK(BM_warp);
BENCHMARK(BM_warp_ref);
BENCHMARK(BM_correlation);
BENCHMARK(BM_correlation_ref);
BENCHMARK(BM_sca);
BENCHMARK(BM_sca_ref);
BENCHMARK(BM_ssim);
BENCHMARK(BM_ssim_ref);
BENCHMARK(BM_matcher_step)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
