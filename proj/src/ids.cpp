#include "obfuslab/ids.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "obfuslab/errors.hpp"
#include "obfuslab/io.hpp"

namespace obfuslab::ids {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::logistic ? "logistic" : "mlp";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "logistic") return ModelKind::logistic;
  if (text == "mlp") return ModelKind::mlp;
  throw ConfigError("unknown IDS kind \"" + std::string(text) + "\" (logistic|mlp)");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

IdsModel::IdsModel(ModelKind kind, nn::Mlp network, double input_scale, std::int64_t version)
    : kind_(kind), network_(std::move(network)), input_scale_(input_scale), version_(version) {
  if (!(input_scale_ > 0.0)) throw ConfigError("IDS input_scale must be positive");
  if (network_.layers().empty() || network_.output_size() != 1)
    throw ConfigError("IDS network must have a single output");
  const auto depth = network_.layers().size();
  if (kind_ == ModelKind::logistic && depth != 1)
    throw ConfigError("logistic IDS must have no hidden layer");
  if (kind_ == ModelKind::mlp && depth != 2)
    throw ConfigError("mlp IDS must have exactly one hidden layer");
}

IdsModel IdsModel::logistic(std::vector<double> weights, double bias, double input_scale) {
  nn::Mlp net({weights.size(), 1});
  net.layers()[0].weights = std::move(weights);
  net.layers()[0].bias = {bias};
  return IdsModel(ModelKind::logistic, std::move(net), input_scale);
}

double IdsModel::predict_non_malicious(const corpus::FeatureVector& v) const {
  if (v.size() != dimension())
    throw InputError("IDS expects " + std::to_string(dimension()) + " frequencies, got " +
                     std::to_string(v.size()));
  std::vector<double> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = v[i] / input_scale_;
  return predict_scaled(x);
}

double IdsModel::predict_scaled(std::span<const double> x) const {
  return sigmoid(network_.forward(x)[0]);
}

namespace {

std::vector<double> scaled_matrix(const corpus::Corpus& corpus,
                                  std::span<const std::size_t> rows, double scale) {
  const std::size_t d = corpus.dimension();
  std::vector<double> x(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& v = corpus.entries()[rows[r]].vector;
    for (std::size_t i = 0; i < d; ++i) x[r * d + i] = v[i] / scale;
  }
  return x;
}

}  // namespace

TrainResult train_ids(const corpus::Corpus& corpus, const TrainOptions& options) {
  if (!(options.split_fraction > 0.0 && options.split_fraction < 1.0))
    throw ConfigError("split_fraction must lie in (0, 1)");
  if (!(options.learning_rate > 0.0)) throw ConfigError("IDS learning rate must be positive");
  auto malicious = corpus.indices_of(corpus::Label::malicious);
  auto benign = corpus.indices_of(corpus::Label::benign);
  if (malicious.size() < 2 || benign.size() < 2)
    throw TrainingError("IDS training needs at least two entries of each label (have " +
                        std::to_string(malicious.size()) + " malicious, " +
                        std::to_string(benign.size()) + " benign)");

  std::mt19937_64 rng(options.seed);
  TrainResult result;
  for (auto* pool : {&malicious, &benign}) {
    std::shuffle(pool->begin(), pool->end(), rng);
    auto n_train = static_cast<std::size_t>(std::lround(options.split_fraction * pool->size()));
    n_train = std::clamp<std::size_t>(n_train, 1, pool->size() - 1);
    result.train_indices.insert(result.train_indices.end(), pool->begin(),
                                pool->begin() + static_cast<std::ptrdiff_t>(n_train));
    result.eval_indices.insert(result.eval_indices.end(),
                               pool->begin() + static_cast<std::ptrdiff_t>(n_train), pool->end());
  }
  std::sort(result.train_indices.begin(), result.train_indices.end());
  std::sort(result.eval_indices.begin(), result.eval_indices.end());

  const std::size_t d = corpus.dimension();
  nn::Mlp net = options.kind == ModelKind::logistic
                    ? nn::Mlp({d, 1})
                    : nn::Mlp({d, options.hidden_units, 1});
  if (options.kind == ModelKind::mlp) net.init_orthogonal(rng, 1.0, 0.1);

  const auto& rows = result.train_indices;
  const std::size_t n = rows.size();
  const auto x = scaled_matrix(corpus, rows, corpus::kFrequencyScale);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r)
    y[r] = corpus.entries()[rows[r]].label == corpus::Label::benign ? 1.0 : 0.0;

  // Jacobi preconditioner for the first layer: the scaled inputs are ~1e-3,
  // so their weights need steps ~1/E[x^2] larger than the bias.
  std::vector<double> precondition(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) precondition[i] += x[r * d + i] * x[r * d + i];
  for (auto& v : precondition) v = 1.0 / (v / static_cast<double>(n) + 1e-6);

  nn::Workspace ws;
  auto grads = net.make_gradients();
  std::vector<double> grad_out(n);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    net.forward(x, n, ws);
    const auto logits = ws.output();
    for (std::size_t r = 0; r < n; ++r) grad_out[r] = (sigmoid(logits[r]) - y[r]) / n;
    grads.zero();
    net.backward(ws, grad_out, grads);
    auto blocks = net.parameter_blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& g = k % 2 == 0 ? grads.weights[k / 2] : grads.bias[k / 2];
      if (k == 0) {
        const std::size_t fan_in = net.layers()[0].in;
        for (std::size_t i = 0; i < g.size(); ++i)
          blocks[k][i] -= options.learning_rate * precondition[i % fan_in] * g[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) blocks[k][i] -= options.learning_rate * g[i];
      }
    }
    if (!net.all_finite()) throw TrainingError("IDS training diverged (non-finite weights)");
  }

  result.model = IdsModel(options.kind, std::move(net));
  result.metrics = evaluate_ids(result.model, corpus, result.eval_indices);
  return result;
}

IdsMetrics evaluate_ids(const IdsModel& model, const corpus::Corpus& corpus,
                        std::span<const std::size_t> indices) {
  if (corpus.dimension() != model.dimension())
    throw InputError("IDS dimension " + std::to_string(model.dimension()) +
                     " does not match corpus dimension " + std::to_string(corpus.dimension()));
  IdsMetrics m;
  std::size_t correct = 0, benign = 0, false_positive = 0;
  for (auto idx : indices) {
    const auto& e = corpus.entries()[idx];
    const bool predicted_benign = model.predict_non_malicious(e.vector) >= 0.5;
    const bool is_benign = e.label == corpus::Label::benign;
    if (predicted_benign == is_benign) ++correct;
    if (is_benign) {
      ++benign;
      if (!predicted_benign) ++false_positive;
    }
  }
  m.n_eval = indices.size();
  m.accuracy = m.n_eval ? static_cast<double>(correct) / m.n_eval : 0.0;
  m.false_positive_rate = benign ? static_cast<double>(false_positive) / benign : 0.0;
  return m;
}

IdsMetrics evaluate_ids(const IdsModel& model, const corpus::Corpus& corpus) {
  std::vector<std::size_t> all(corpus.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return evaluate_ids(model, corpus, all);
}

std::string encode_ids(const IdsModel& model) {
  nlohmann::json header;
  header["kind"] = to_string(model.kind());
  header["input_scale"] = model.input_scale();
  header["model_version"] = model.version();
  return io::encode_checkpoint(header, model.network().parameter_shapes(),
                               model.network().parameter_blocks());
}

IdsModel decode_ids(std::string_view bytes, std::string_view source) {
  const std::string where(source);
  const auto newline = bytes.find('\n');
  std::string kind_text;
  try {
    auto header = nlohmann::json::parse(bytes.substr(0, newline));
    kind_text = header.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(where + ": unreadable IDS checkpoint header");
  }
  ModelKind kind;
  try {
    kind = parse_model_kind(kind_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(where + ": " + e.what());
  }
  auto ckpt = io::decode_checkpoint(bytes, kind_text, source);
  const auto& arrays = ckpt.arrays;
  const auto shapes = ckpt.header["shapes"].get<std::vector<std::vector<std::size_t>>>();
  const std::size_t expected_layers = kind == ModelKind::logistic ? 1 : 2;
  if (shapes.size() != 2 * expected_layers)
    throw CheckpointError(where + ": IDS checkpoint has " + std::to_string(shapes.size()) +
                          " arrays, kind " + kind_text + " needs " +
                          std::to_string(2 * expected_layers));
  std::vector<std::size_t> widths;
  for (std::size_t k = 0; k < expected_layers; ++k) {
    const auto& w = shapes[2 * k];
    const auto& b = shapes[2 * k + 1];
    if (w.size() != 2 || b.size() != 1 || w[0] != b[0] ||
        (k > 0 && w[1] != widths.back()))
      throw CheckpointError(where + ": IDS checkpoint shape mismatch at layer " +
                            std::to_string(k));
    if (k == 0) widths.push_back(w[1]);
    widths.push_back(w[0]);
  }
  if (widths.back() != 1 || widths.front() == 0)
    throw CheckpointError(where + ": IDS checkpoint shape mismatch (output must be 1)");
  nn::Mlp net(widths);
  auto blocks = net.parameter_blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k)
    std::copy(arrays[k].begin(), arrays[k].end(), blocks[k].begin());
  double scale = 0.0;
  std::int64_t version = 1;
  try {
    scale = ckpt.header.at("input_scale").get<double>();
    if (ckpt.header.contains("model_version"))
      version = ckpt.header["model_version"].get<std::int64_t>();
    return IdsModel(kind, std::move(net), scale, version);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(where + ": IDS checkpoint input_scale missing");
  } catch (const ConfigError& e) {
    throw CheckpointError(where + ": " + e.what());
  }
}

void save_ids(const IdsModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_ids(model));
}

IdsModel load_ids(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const InputError& e) {
    throw CheckpointError(e.what());
  }
  return decode_ids(bytes, path.string());
}

}  // namespace obfuslab::ids
