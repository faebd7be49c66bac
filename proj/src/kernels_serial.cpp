#include "obfuslab/kernels.hpp"

#include <cmath>

namespace obfuslab::kernels::serial {

void dense_forward(DenseShape s, std::span<const double> weights,
                   std::span<const double> bias, std::span<const double> input,
                   std::span<double> output) {
  for (std::size_t b = 0; b < s.batch; ++b) {
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
  for (std::size_t o = 0; o < s.out; ++o) {
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
  for (std::size_t b = 0; b < s.batch; ++b) {
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
  for (double& v : values) v = std::tanh(v);
}

void tanh_backward_inplace(std::span<const double> activated,
                           std::span<double> grad) {
  for (std::size_t k = 0; k < grad.size(); ++k)
    grad[k] *= 1.0 - activated[k] * activated[k];
}

}  // namespace obfuslab::kernels::serial
