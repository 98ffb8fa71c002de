// Micro benchmarks for the hot paths: convolution, NMS, localization cost.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "lsc/fusion.hpp"
#include "lsc/metrics.hpp"
#include "lsc/refnet/ops.hpp"

namespace {

using namespace lsc;

nn::Tensor random_tensor(nn::Shape s, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Tensor t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

std::vector<double> random_values(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  const auto input = random_tensor({c, side, side}, 1);
  const auto weight = random_values(static_cast<std::size_t>(c) * c * 9, 2);
  const auto bias = random_values(c, 3);
  std::vector<double> cols;
  for (auto _ : state) {
    auto out = nn::conv2d_forward(input, weight, bias, c, {}, cols);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c) * c * 9 * side * side);
}
BENCHMARK(BM_Conv2dForward)->Args({4, 112})->Args({16, 56})->Args({32, 28});

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  const auto input = random_tensor({c, side, side}, 1);
  const auto weight = random_values(static_cast<std::size_t>(c) * c * 9, 2);
  const auto bias = random_values(c, 3);
  std::vector<double> cols;
  nn::conv2d_forward(input, weight, bias, c, {}, cols);
  const auto grad_out = random_tensor({c, side, side}, 4);
  nn::Tensor grad_in(input.shape());
  std::vector<double> gw(weight.size()), gb(bias.size());
  for (auto _ : state) {
    nn::conv2d_backward(input, weight, grad_out, {}, cols, &grad_in, gw, gb);
    benchmark::DoNotOptimize(grad_in.data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({4, 112})->Args({16, 56});

std::vector<Detection> random_detections(int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 512.0), conf(0.0, 1.0);
  std::uniform_int_distribution<int> side(2, 24);
  std::vector<Detection> d(n);
  for (auto& x : d) {
    x.center_x = pos(rng);
    x.center_y = pos(rng);
    x.side = side(rng);
    x.confidence = conf(rng);
  }
  return d;
}

void BM_Nms(benchmark::State& state) {
  const auto dets = random_detections(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) {
    auto kept = nms(dets, NmsConfig{});
    benchmark::DoNotOptimize(kept.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nms)->Range(64, 4096)->Complexity();

std::vector<Point> random_points(int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 256.0);
  std::vector<Point> p(n);
  for (auto& x : p) x = {pos(rng), pos(rng)};
  return p;
}

void BM_LocalizationCost(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto pred = random_points(n, 6);
  const auto gt = random_points(n, 7);
  for (auto _ : state) benchmark::DoNotOptimize(localization_cost(pred, gt));
  state.SetComplexityN(n);
}
BENCHMARK(BM_LocalizationCost)->RangeMultiplier(2)->Range(16, 512)->Complexity();

}  // namespace

BENCHMARK_MAIN();
