#pragma once

#include <cstddef>
#include <span>

// Dense-layer kernels shared by the IDS and the actor/critic networks.
//
// Layout: weights are row-major [out x in], activations row-major
// [batch x features]. Every output element is accumulated serially in a
// fixed order in both variants, so the OpenMP kernels are bit-identical to
// the serial reference for any thread count.
namespace obfuslab::kernels {

struct DenseShape {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

namespace serial {

// output = input * weights^T + bias
void dense_forward(DenseShape shape, std::span<const double> weights,
                   std::span<const double> bias, std::span<const double> input,
                   std::span<double> output);

// Accumulates into grad_weights / grad_bias; overwrites grad_input unless it
// is empty.
void dense_backward(DenseShape shape, std::span<const double> weights,
                    std::span<const double> input,
                    std::span<const double> grad_output,
                    std::span<double> grad_weights, std::span<double> grad_bias,
                    std::span<double> grad_input);

void tanh_inplace(std::span<double> values);

// grad *= (1 - activated^2), where activated = tanh(pre-activation).
void tanh_backward_inplace(std::span<const double> activated,
                           std::span<double> grad);

}  // namespace serial

namespace parallel {

void dense_forward(DenseShape shape, std::span<const double> weights,
                   std::span<const double> bias, std::span<const double> input,
                   std::span<double> output);

void dense_backward(DenseShape shape, std::span<const double> weights,
                    std::span<const double> input,
                    std::span<const double> grad_output,
                    std::span<double> grad_weights, std::span<double> grad_bias,
                    std::span<double> grad_input);

void tanh_inplace(std::span<double> values);

void tanh_backward_inplace(std::span<const double> activated,
                           std::span<double> grad);

// Work size (batch * in * out) below which the parallel kernels stay on the
// calling thread.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

}  // namespace parallel

using parallel::dense_backward;
using parallel::dense_forward;
using parallel::tanh_backward_inplace;
using parallel::tanh_inplace;

}  // namespace obfuslab::kernels
