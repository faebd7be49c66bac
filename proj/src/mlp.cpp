#include "obfuslab/mlp.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "obfuslab/errors.hpp"
#include "obfuslab/kernels.hpp"

namespace obfuslab::nn {

void Gradients::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

double Gradients::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weights)
    for (double g : w) total += g * g;
  for (const auto& b : bias)
    for (double g : b) total += g * g;
  return total;
}

void Gradients::scale(double factor) {
  for (auto& w : weights)
    for (double& g : w) g *= factor;
  for (auto& b : bias)
    for (double& g : b) g *= factor;
}

Mlp::Mlp(std::vector<std::size_t> widths) {
  if (widths.size() < 2) throw ConfigError("network needs at least input and output widths");
  for (auto w : widths)
    if (w == 0) throw ConfigError("network layer width must be positive");
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer;
    layer.in = widths[k];
    layer.out = widths[k + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
  }
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> out;
  if (layers_.empty()) return out;
  out.push_back(layers_.front().in);
  for (const auto& l : layers_) out.push_back(l.out);
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

void Mlp::init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& layer = layers_[k];
    const double gain = k + 1 == layers_.size() ? output_gain : hidden_gain;
    const auto rows = static_cast<Eigen::Index>(layer.out);
    const auto cols = static_cast<Eigen::Index>(layer.in);
    const bool tall = rows >= cols;
    Eigen::MatrixXd flat(tall ? rows : cols, tall ? cols : rows);
    for (Eigen::Index c = 0; c < flat.cols(); ++c)
      for (Eigen::Index r = 0; r < flat.rows(); ++r) flat(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(flat);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(flat.rows(), flat.cols());
    const Eigen::MatrixXd r = qr.matrixQR();
    for (Eigen::Index c = 0; c < q.cols(); ++c)
      if (r(c, c) < 0) q.col(c) *= -1.0;
    for (Eigen::Index o = 0; o < rows; ++o)
      for (Eigen::Index i = 0; i < cols; ++i)
        layer.weights[static_cast<std::size_t>(o * cols + i)] =
            gain * (tall ? q(o, i) : q(i, o));
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

void Mlp::forward(std::span<const double> input, std::size_t batch, Workspace& ws) const {
  if (input.size() != batch * input_size())
    throw InputError("network input has " + std::to_string(input.size()) +
                     " values, expected " + std::to_string(batch * input_size()));
  ws.batch = batch;
  ws.values.resize(layers_.size() + 1);
  ws.values[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    auto& out = ws.values[k + 1];
    out.resize(batch * l.out);
    kernels::dense_forward({batch, l.in, l.out}, l.weights, l.bias, ws.values[k], out);
    if (k + 1 < layers_.size()) kernels::tanh_inplace(out);
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (input.size() != input_size())
    throw InputError("network input has " + std::to_string(input.size()) +
                     " values, expected " + std::to_string(input_size()));
  std::vector<double> current(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    next.resize(l.out);
    kernels::serial::dense_forward({1, l.in, l.out}, l.weights, l.bias, current, next);
    if (k + 1 < layers_.size()) kernels::serial::tanh_inplace(next);
    current.swap(next);
  }
  return current;
}

void Mlp::backward(const Workspace& ws, std::span<const double> grad_output,
                   Gradients& grads) const {
  std::vector<double> grad(grad_output.begin(), grad_output.end());
  std::vector<double> grad_in;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    grad_in.resize(k > 0 ? ws.batch * l.in : 0);
    kernels::dense_backward({ws.batch, l.in, l.out}, l.weights, ws.values[k], grad,
                            grads.weights[k], grads.bias[k], grad_in);
    if (k > 0) {
      kernels::tanh_backward_inplace(ws.values[k], grad_in);
      grad.swap(grad_in);
    }
  }
}

Gradients Mlp::make_gradients() const {
  Gradients g;
  for (const auto& l : layers_) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameter_blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::vector<std::size_t>> Mlp::parameter_shapes() const {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& l : layers_) {
    out.push_back({l.out, l.in});
    out.push_back({l.out});
  }
  return out;
}

bool Mlp::all_finite() const {
  for (const auto& block : parameter_blocks())
    for (double v : block)
      if (!std::isfinite(v)) return false;
  return true;
}

Adam::Adam(const Mlp& net, AdamOptions options) : options_(options) {
  for (const auto& block : net.parameter_blocks()) {
    first_.emplace_back(block.size(), 0.0);
    second_.emplace_back(block.size(), 0.0);
  }
}

void Adam::step(Mlp& net, const Gradients& grads, double learning_rate) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  auto blocks = net.parameter_blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& g = (k % 2 == 0) ? grads.weights[k / 2] : grads.bias[k / 2];
    auto& m = first_[k];
    auto& v = second_[k];
    auto p = blocks[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

std::vector<std::span<double>> Adam::moment_blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t k = 0; k < first_.size(); ++k) {
    out.emplace_back(first_[k]);
    out.emplace_back(second_[k]);
  }
  return out;
}

std::vector<std::span<const double>> Adam::moment_blocks() const {
  std::vector<std::span<const double>> out;
  for (std::size_t k = 0; k < first_.size(); ++k) {
    out.emplace_back(first_[k]);
    out.emplace_back(second_[k]);
  }
  return out;
}

}  // namespace obfuslab::nn
