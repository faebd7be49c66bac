#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "obfuslab/kernels.hpp"

namespace k = obfuslab::kernels;

namespace {

struct Operands {
  k::DenseShape shape;
  std::vector<double> w, b, x, y, g, gw, gb, gi;

  explicit Operands(k::DenseShape s) : shape(s) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (auto& e : v) e = d(rng);
    };
    fill(w, s.out * s.in);
    fill(b, s.out);
    fill(x, s.batch * s.in);
    fill(g, s.batch * s.out);
    y.assign(s.batch * s.out, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
    gi.assign(x.size(), 0.0);
  }
};

k::DenseShape shape_of(const benchmark::State& state) {
  return {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
          static_cast<std::size_t>(state.range(2))};
}

template <bool Parallel>
void forward(benchmark::State& state) {
  Operands op(shape_of(state));
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::dense_forward(op.shape, op.w, op.b, op.x, op.y);
    else
      k::serial::dense_forward(op.shape, op.w, op.b, op.x, op.y);
    benchmark::DoNotOptimize(op.y.data());
  }
  state.SetItemsProcessed(state.iterations() * op.shape.batch);
}

template <bool Parallel>
void backward(benchmark::State& state) {
  Operands op(shape_of(state));
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::dense_backward(op.shape, op.w, op.x, op.g, op.gw, op.gb, op.gi);
    else
      k::serial::dense_backward(op.shape, op.w, op.x, op.g, op.gw, op.gb, op.gi);
    benchmark::DoNotOptimize(op.gw.data());
  }
  state.SetItemsProcessed(state.iterations() * op.shape.batch);
}

// Single observation, PPO minibatch through a hidden layer, full rollout
// through the 64-opcode input layer.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({1, 128, 64})->Args({128, 64, 64})->Args({1024, 64, 64})->Args({1024, 128, 64});
}

}  // namespace

BENCHMARK(forward<false>)->Name("dense_forward/serial")->Apply(shapes);
BENCHMARK(forward<true>)->Name("dense_forward/parallel")->Apply(shapes);
BENCHMARK(backward<false>)->Name("dense_backward/serial")->Apply(shapes);
BENCHMARK(backward<true>)->Name("dense_backward/parallel")->Apply(shapes);

BENCHMARK_MAIN();
