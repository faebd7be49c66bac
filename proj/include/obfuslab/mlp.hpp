#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

// Fully connected network with tanh hidden layers and a linear output layer.
// Used for the logistic/MLP discriminators and the PPO actor and critic.
namespace obfuslab::nn {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major [out x in]
  std::vector<double> bias;     // [out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Activations cached by a batched forward pass, consumed by backward().
struct Workspace {
  std::size_t batch = 0;
  // values[0] is the input; values[k] the output of layer k-1 (post-tanh
  // for hidden layers, linear for the last one).
  std::vector<std::vector<double>> values;

  std::span<const double> output() const { return values.back(); }
};

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  void zero();
  double squared_norm() const;
  void scale(double factor);
};

class Mlp {
 public:
  Mlp() = default;
  // widths = {input, hidden..., output}; parameters start at zero.
  explicit Mlp(std::vector<std::size_t> widths);

  std::size_t input_size() const { return layers_.front().in; }
  std::size_t output_size() const { return layers_.back().out; }
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Orthogonal weights (rows or columns orthonormal, scaled by the gain),
  // zero biases. Hidden layers use hidden_gain, the last layer output_gain.
  void init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain);

  void forward(std::span<const double> input, std::size_t batch, Workspace& ws) const;
  std::vector<double> forward(std::span<const double> input) const;

  // Accumulates parameter gradients for dLoss/dOutput = grad_output.
  void backward(const Workspace& ws, std::span<const double> grad_output,
                Gradients& grads) const;

  Gradients make_gradients() const;

  // Flat views over every parameter array, in checkpoint order
  // (w0, b0, w1, b1, ...).
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;
  std::vector<std::vector<std::size_t>> parameter_shapes() const;

  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamOptions&, const AdamOptions&) = default;
};

// Adaptive-moment optimizer state for one Mlp.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const Mlp& net, AdamOptions options = {});

  void step(Mlp& net, const Gradients& grads, double learning_rate);

  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }
  // First and second moments, interleaved per block as (m0, v0, m1, v1, ...).
  std::vector<std::span<double>> moment_blocks();
  std::vector<std::span<const double>> moment_blocks() const;

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace obfuslab::nn
