#include "obfuslab/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace obfuslab::kernels::parallel {

namespace {

bool worth_parallel(DenseShape s) {
  return s.batch * s.in * s.out >= kParallelThreshold;
}

}  // namespace

void dense_forward(DenseShape s, std::span<const double> weights,
                   std::span<const double> bias, std::span<const double> input,
                   std::span<double> output) {
  const auto rows = static_cast<std::int64_t>(s.batch);
#pragma omp parallel for schedule(static) if (worth_parallel(s))
  for (std::int64_t b = 0; b < rows; ++b) {
    const double* x = input.data() + b * s.in;
    double* y = output.data() + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* w = weights.data() + o * s.in;
      double acc = bias[o];
      for (std::size_t i = 0; i < s.in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
}

void dense_backward(DenseShape s, std::span<const double> weights,
                    std::span<const double> input,
                    std::span<const double> grad_output,
                    std::span<double> grad_weights, std::span<double> grad_bias,
                    std::span<double> grad_input) {
  const bool par = worth_parallel(s);
  const auto outs = static_cast<std::int64_t>(s.out);
  // Parallel over output units: each weight row is owned by one thread and
  // summed over the batch in order.
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t o = 0; o < outs; ++o) {
    double* gw = grad_weights.data() + o * s.in;
    double gb = 0.0;
    for (std::size_t b = 0; b < s.batch; ++b) {
      const double g = grad_output[b * s.out + o];
      if (g == 0.0) continue;
      gb += g;
      const double* x = input.data() + b * s.in;
      for (std::size_t i = 0; i < s.in; ++i) gw[i] += g * x[i];
    }
    grad_bias[o] += gb;
  }
  if (grad_input.empty()) return;
  const auto rows = static_cast<std::int64_t>(s.batch);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t b = 0; b < rows; ++b) {
    double* gx = grad_input.data() + b * s.in;
    for (std::size_t i = 0; i < s.in; ++i) gx[i] = 0.0;
    for (std::size_t o = 0; o < s.out; ++o) {
      const double g = grad_output[b * s.out + o];
      if (g == 0.0) continue;
      const double* w = weights.data() + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) gx[i] += g * w[i];
    }
  }
}

void tanh_inplace(std::span<double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel for schedule(static) if (values.size() >= 8192)
  for (std::int64_t k = 0; k < n; ++k) values[k] = std::tanh(values[k]);
}

void tanh_backward_inplace(std::span<const double> activated,
                           std::span<double> grad) {
  const auto n = static_cast<std::int64_t>(grad.size());
#pragma omp parallel for schedule(static) if (grad.size() >= 8192)
  for (std::int64_t k = 0; k < n; ++k)
    grad[k] *= 1.0 - activated[k] * activated[k];
}

}  // namespace obfuslab::kernels::parallel
