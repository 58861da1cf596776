#include "slcnn/model.hpp"

#include <cmath>
#include <string>

#include "slcnn/error.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

std::string to_string(Variant v) { return v == Variant::kSlcnn ? "slcnn" : "slcnn+v"; }

Variant parse_variant(std::string_view s) {
  if (s == "slcnn") return Variant::kSlcnn;
  if (s == "slcnn+v" || s == "slcnn_v" || s == "slcnnv") return Variant::kSlcnnV;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected slcnn or slcnn+v)");
}

std::size_t ModelConfig::horizontal_blocks() const {
  std::size_t width = sentence_threshold;
  std::size_t blocks = 0;
  while (width > 1) {
    if (width < 4) {
      throw ConfigError("T_s=" + std::to_string(sentence_threshold) +
                        " does not collapse to width 1 under horizontal blocks (reached width " +
                        std::to_string(width) + ", each block needs >= 4)");
    }
    width = hcb_output_width(width);
    ++blocks;
  }
  if (blocks == 0) throw ConfigError("T_s must be >= 4");
  return blocks;
}

std::size_t ModelConfig::flatten_rows() const {
  return variant == Variant::kSlcnnV ? vcb_output_rows(doc_threshold) : doc_threshold;
}

void ModelConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (num_filters == 0) throw ConfigError("num_filters must be >= 1");
  if (fc_units == 0) throw ConfigError("fc_units must be >= 1");
  if (embed_dim == 0) throw ConfigError("embed_dim must be >= 1");
  if (doc_threshold == 0) throw ConfigError("T_d must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (sentence_threshold != kDefaultSentenceThreshold && !custom_sentence_threshold) {
    throw ConfigError("T_s=" + std::to_string(sentence_threshold) +
                      " requires an explicit override; the architecture is defined for T_s=46");
  }
  const auto blocks = horizontal_blocks();
  if (sentence_threshold == kDefaultSentenceThreshold && blocks != 4) {
    throw ConfigError("internal: T_s=46 must give four horizontal blocks");
  }
  if (variant == Variant::kSlcnnV && doc_threshold < 4) {
    throw ConfigError("SLCNN+V needs T_d >= 4 (the vertical block maps " + std::to_string(doc_threshold) +
                      " rows to " + std::to_string(doc_threshold >= 2 ? vcb_output_rows(doc_threshold) : 0) + ")");
  }
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  return variant == o.variant && fc_units == o.fc_units && num_filters == o.num_filters &&
         doc_threshold == o.doc_threshold && sentence_threshold == o.sentence_threshold &&
         embed_dim == o.embed_dim && num_classes == o.num_classes;
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"variant", to_string(variant)},
      {"fc_units", fc_units},
      {"num_filters", num_filters},
      {"t_d", doc_threshold},
      {"t_s", sentence_threshold},
      {"custom_t_s", custom_sentence_threshold},
      {"embed_dim", embed_dim},
      {"num_classes", num_classes},
      {"seed", seed},
      {"learning_rate", learning_rate},
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"dropout", dropout},
      {"oov_seed", oov_seed},
      {"embedding_digest", embedding_digest},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.fc_units = j.at("fc_units").get<std::size_t>();
    c.num_filters = j.at("num_filters").get<std::size_t>();
    c.doc_threshold = j.at("t_d").get<std::size_t>();
    c.sentence_threshold = j.at("t_s").get<std::size_t>();
    c.custom_sentence_threshold = j.value("custom_t_s", false);
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.oov_seed = j.value("oov_seed", kDefaultOovSeed);
    c.embedding_digest = j.value("embedding_digest", std::string());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid model config: ") + e.what());
  }
}

template <typename T>
ModelParameters<T> make_parameters(const ModelConfig& config) {
  config.validate();
  ModelParameters<T> p;
  const std::size_t k = config.num_filters;
  const std::size_t blocks = config.horizontal_blocks();
  for (std::size_t b = 0; b < blocks; ++b) {
    p.convs.emplace_back(k, 1, 2, b == 0 ? config.embed_dim : k);
    p.convs.emplace_back(k, 1, 2, k);
  }
  if (config.variant == Variant::kSlcnnV) {
    p.convs.emplace_back(k, 2, 1, k);
    p.convs.emplace_back(k, 2, 1, k);
  }
  p.fc1 = DenseLayer<T>(config.flatten_size(), config.fc_units);
  p.fc2 = DenseLayer<T>(config.fc_units, config.fc_units);
  p.output = DenseLayer<T>(config.fc_units, config.num_classes);
  return p;
}

namespace {

std::string conv_name(const ModelConfig& config, std::size_t index) {
  const std::size_t hcb_convs = 2 * config.horizontal_blocks();
  const std::string layer = "conv" + std::to_string(index % 2 + 1);
  if (index < hcb_convs) return "hcb" + std::to_string(index / 2 + 1) + "." + layer;
  return "vcb." + layer;
}

template <typename V, typename Params>
std::vector<ParameterView<V>> make_views(Params& p, const ModelConfig& config) {
  std::vector<ParameterView<V>> v;
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    auto& c = p.convs[i];
    const auto name = conv_name(config, i);
    v.push_back({name + ".weight", {c.filters, c.height, c.width, c.depth}, std::span<V>(c.weights)});
    v.push_back({name + ".bias", {c.filters}, std::span<V>(c.biases)});
  }
  auto dense = [&](auto& layer, const std::string& name) {
    v.push_back({name + ".weight", {layer.outputs, layer.inputs}, std::span<V>(layer.weights)});
    v.push_back({name + ".bias", {layer.outputs}, std::span<V>(layer.biases)});
  };
  dense(p.fc1, "fc1");
  dense(p.fc2, "fc2");
  dense(p.output, "output");
  return v;
}

}  // namespace

template <typename T>
std::vector<ParameterView<T>> ModelParameters<T>::views(const ModelConfig& config) {
  return make_views<T>(*this, config);
}

template <typename T>
std::vector<ParameterView<const T>> ModelParameters<T>::views(const ModelConfig& config) const {
  return make_views<const T>(*this, config);
}

template <typename T>
std::size_t ModelParameters<T>::parameter_count() const {
  std::size_t n = fc1.parameter_count() + fc2.parameter_count() + output.parameter_count();
  for (const auto& c : convs) n += c.parameter_count();
  return n;
}

template <typename T>
void ModelParameters<T>::fill(T value) {
  for (auto& c : convs) {
    std::ranges::fill(c.weights, value);
    std::ranges::fill(c.biases, value);
  }
  for (auto* d : {&fc1, &fc2, &output}) {
    std::ranges::fill(d->weights, value);
    std::ranges::fill(d->biases, value);
  }
}

std::size_t count_parameters(const ModelConfig& config) {
  config.validate();
  const std::size_t k = config.num_filters;
  const std::size_t first = k * (2 * config.embed_dim) + k;
  const std::size_t deeper = k * (2 * k) + k;
  std::size_t convs_after_first = 2 * config.horizontal_blocks() - 1;
  if (config.variant == Variant::kSlcnnV) convs_after_first += 2;
  const std::size_t fc = config.fc_units;
  return first + convs_after_first * deeper + (config.flatten_size() * fc + fc) + (fc * fc + fc) +
         (fc * config.num_classes + config.num_classes);
}

template <typename T>
BasicModel<T>::BasicModel(ModelConfig config, Parameters parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
  const auto expected = make_parameters<T>(config_);
  bool ok = expected.convs.size() == params_.convs.size();
  for (std::size_t i = 0; ok && i < expected.convs.size(); ++i) {
    const auto& a = expected.convs[i];
    const auto& b = params_.convs[i];
    ok = a.filters == b.filters && a.height == b.height && a.width == b.width && a.depth == b.depth &&
         a.weights.size() == b.weights.size() && a.biases.size() == b.biases.size();
  }
  for (auto [a, b] : {std::pair{&expected.fc1, &params_.fc1}, std::pair{&expected.fc2, &params_.fc2},
                      std::pair{&expected.output, &params_.output}}) {
    ok = ok && a->inputs == b->inputs && a->outputs == b->outputs && a->weights.size() == b->weights.size() &&
         a->biases.size() == b->biases.size();
  }
  if (!ok) throw ShapeError("model parameters do not match the configuration");
}

template <typename T>
BasicModel<T> BasicModel<T>::build(const ModelConfig& config) {
  auto params = make_parameters<T>(config);
  Rng rng(config.seed);
  auto glorot = [&](std::span<T> w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w) x = static_cast<T>(rng.uniform(-limit, limit));
  };
  for (auto& c : params.convs) {
    const std::size_t receptive = c.height * c.width;
    glorot(c.weights, receptive * c.depth, receptive * c.filters);
  }
  for (auto* d : {&params.fc1, &params.fc2, &params.output}) glorot(d->weights, d->inputs, d->outputs);
  return BasicModel(config, std::move(params));
}

template <typename T>
struct BasicModel<T>::Trace {
  const BasicFeatureMap<T>* input = nullptr;
  // conv_out[c] is the (post-ReLU) output of conv c; block_out[b] is the
  // pooled output of block b.
  std::vector<BasicFeatureMap<T>> conv_out;
  std::vector<BasicFeatureMap<T>> block_out;
  std::vector<PoolRecord> pools;
  std::vector<T> h1, d1, h2, d2, logits;
  DropoutMask m1, m2;
};

template <typename T>
void BasicModel<T>::check_input(const BasicFeatureMap<T>& doc) const {
  if (doc.rows() != config_.doc_threshold || doc.cols() != config_.sentence_threshold ||
      doc.channels() != config_.embed_dim) {
    throw ShapeError("model input is " + std::to_string(doc.rows()) + "x" + std::to_string(doc.cols()) + "x" +
                     std::to_string(doc.channels()) + ", configuration expects " +
                     std::to_string(config_.doc_threshold) + "x" + std::to_string(config_.sentence_threshold) +
                     "x" + std::to_string(config_.embed_dim));
  }
}

template <typename T>
void BasicModel<T>::run_forward(const BasicFeatureMap<T>& doc, Mode mode, std::uint64_t dropout_seed,
                                Trace& t) const {
  check_input(doc);
  t.input = &doc;
  const std::size_t blocks = params_.convs.size() / 2;
  t.conv_out.resize(params_.convs.size());
  t.block_out.resize(blocks);
  t.pools.resize(blocks);
  const BasicFeatureMap<T>* x = &doc;
  for (std::size_t b = 0; b < blocks; ++b) {
    t.conv_out[2 * b] = conv2d_forward(*x, params_.convs[2 * b], Activation::kRelu);
    t.conv_out[2 * b + 1] = conv2d_forward(t.conv_out[2 * b], params_.convs[2 * b + 1], Activation::kRelu);
    const bool vertical = params_.convs[2 * b].height == 2;
    auto pooled = maxpool_forward(t.conv_out[2 * b + 1], vertical ? PoolAxis::kVertical : PoolAxis::kHorizontal);
    t.block_out[b] = std::move(pooled.output);
    t.pools[b] = std::move(pooled.record);
    x = &t.block_out[b];
  }
  if (x->cols() != 1 || x->size() != config_.flatten_size()) {
    throw ShapeError("internal: final feature map is not flatten_rows x 1 x k");
  }
  // Row-major (sentence, channel) flatten is the storage order itself.
  const std::span<const T> flat = x->data();
  SplitMix64 rng(dropout_seed);
  t.h1 = dense_forward(flat, params_.fc1, Activation::kRelu);
  auto r1 = dropout(std::span<const T>(t.h1), config_.dropout, mode, rng);
  t.d1 = std::move(r1.output);
  t.m1 = std::move(r1.mask);
  t.h2 = dense_forward(std::span<const T>(t.d1), params_.fc2, Activation::kRelu);
  auto r2 = dropout(std::span<const T>(t.h2), config_.dropout, mode, rng);
  t.d2 = std::move(r2.output);
  t.m2 = std::move(r2.mask);
  t.logits = dense_forward(std::span<const T>(t.d2), params_.output, Activation::kIdentity);
}

template <typename T>
std::vector<T> BasicModel<T>::logits(const BasicFeatureMap<T>& doc, Mode mode, std::uint64_t dropout_seed) const {
  Trace t;
  run_forward(doc, mode, dropout_seed, t);
  return std::move(t.logits);
}

template <typename T>
std::uint64_t BasicModel<T>::activation_pattern(const BasicFeatureMap<T>& doc, Mode mode,
                                                std::uint64_t dropout_seed) const {
  Trace t;
  run_forward(doc, mode, dropout_seed, t);
  std::string bits;
  auto relu_states = [&bits](std::span<const T> values) {
    for (T v : values) bits.push_back(v > T{0} ? '1' : '0');
  };
  for (const auto& c : t.conv_out) relu_states(c.data());
  relu_states(t.h1);
  relu_states(t.h2);
  for (const auto& p : t.pools) {
    bits.append(reinterpret_cast<const char*>(p.argmax.data()), p.argmax.size() * sizeof(std::uint32_t));
  }
  return fnv1a64(bits);
}

template <typename T>
typename BasicModel<T>::Step BasicModel<T>::forward_backward(const BasicFeatureMap<T>& doc, std::size_t label,
                                                             Mode mode, std::uint64_t dropout_seed,
                                                             Parameters& grads) const {
  Trace t;
  run_forward(doc, mode, dropout_seed, t);
  auto loss = softmax_cross_entropy(std::span<const T>(t.logits), label);

  // Dense head, output to input.
  std::vector<T> g_d2(params_.fc2.outputs);
  dense_backward_accumulate(std::span<const T>(t.d2), params_.output, std::span<const T>(t.logits),
                            std::span<const T>(loss.grad_logits), Activation::kIdentity,
                            std::span<T>(grads.output.weights), std::span<T>(grads.output.biases), std::span<T>(g_d2));
  const auto g_h2 = dropout_backward(std::span<const T>(g_d2), t.m2);
  std::vector<T> g_d1(params_.fc1.outputs);
  dense_backward_accumulate(std::span<const T>(t.d1), params_.fc2, std::span<const T>(t.h2),
                            std::span<const T>(g_h2), Activation::kRelu, std::span<T>(grads.fc2.weights),
                            std::span<T>(grads.fc2.biases), std::span<T>(g_d1));
  const auto g_h1 = dropout_backward(std::span<const T>(g_d1), t.m1);

  const std::size_t blocks = t.block_out.size();
  const auto& last = t.block_out[blocks - 1];
  BasicFeatureMap<T> g_x(last.rows(), last.cols(), last.channels());
  dense_backward_accumulate(last.data(), params_.fc1, std::span<const T>(t.h1), std::span<const T>(g_h1),
                            Activation::kRelu, std::span<T>(grads.fc1.weights), std::span<T>(grads.fc1.biases),
                            g_x.data());

  BasicFeatureMap<T> g_mid;
  for (std::size_t b = blocks; b-- > 0;) {
    const auto g_c2 = maxpool_backward(t.pools[b], g_x);
    const auto& c1 = t.conv_out[2 * b];
    conv2d_backward_accumulate(c1, params_.convs[2 * b + 1], t.conv_out[2 * b + 1], g_c2, Activation::kRelu,
                               std::span<T>(grads.convs[2 * b + 1].weights),
                               std::span<T>(grads.convs[2 * b + 1].biases), &g_mid);
    const BasicFeatureMap<T>& block_in = b == 0 ? *t.input : t.block_out[b - 1];
    // Embeddings are frozen: no input gradient for the first block.
    conv2d_backward_accumulate(block_in, params_.convs[2 * b], c1, g_mid, Activation::kRelu,
                               std::span<T>(grads.convs[2 * b].weights), std::span<T>(grads.convs[2 * b].biases),
                               b == 0 ? nullptr : &g_x);
  }
  return {loss.loss, std::move(t.logits)};
}

template <typename T>
BasicFeatureMap<T> BasicModel<T>::sentence_features(const BasicFeatureMap<T>& doc) const {
  check_input(doc);
  BasicFeatureMap<T> x = doc;
  for (std::size_t b = 0; b < config_.horizontal_blocks(); ++b) {
    auto c1 = conv2d_forward(x, params_.convs[2 * b], Activation::kRelu);
    auto c2 = conv2d_forward(c1, params_.convs[2 * b + 1], Activation::kRelu);
    x = maxpool_forward(c2, PoolAxis::kHorizontal).output;
  }
  return x;
}

template <typename T>
BasicFeatureMap<T> BasicModel<T>::pre_flatten(const BasicFeatureMap<T>& doc) const {
  Trace t;
  run_forward(doc, Mode::kEval, 0, t);
  return t.block_out.back();
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
  auto out = make_parameters<U>(config_);
  auto copy = [](const std::vector<T>& from, std::vector<U>& to) {
    for (std::size_t i = 0; i < from.size(); ++i) to[i] = static_cast<U>(from[i]);
  };
  for (std::size_t i = 0; i < params_.convs.size(); ++i) {
    copy(params_.convs[i].weights, out.convs[i].weights);
    copy(params_.convs[i].biases, out.convs[i].biases);
  }
  copy(params_.fc1.weights, out.fc1.weights);
  copy(params_.fc1.biases, out.fc1.biases);
  copy(params_.fc2.weights, out.fc2.weights);
  copy(params_.fc2.biases, out.fc2.biases);
  copy(params_.output.weights, out.output.weights);
  copy(params_.output.biases, out.output.biases);
  return BasicModel<U>(config_, std::move(out));
}

std::vector<std::vector<float>> forward(const Model& model, std::span<const DocTensor> batch) {
  std::vector<std::vector<float>> out;
  out.reserve(batch.size());
  for (const auto& doc : batch) out.push_back(model.logits(doc.tensor));
  return out;
}

template struct ModelParameters<float>;
template struct ModelParameters<double>;
template ModelParameters<float> make_parameters<float>(const ModelConfig&);
template ModelParameters<double> make_parameters<double>(const ModelConfig&);
template class BasicModel<float>;
template class BasicModel<double>;
template struct ModelParameters<long double>;
template ModelParameters<long double> make_parameters<long double>(const ModelConfig&);
template class BasicModel<long double>;
template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;
template BasicModel<long double> BasicModel<double>::cast<long double>() const;

}  // namespace slcnn
