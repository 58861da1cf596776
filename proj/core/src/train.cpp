#include "slcnn/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <thread>

#include "slcnn/error.hpp"
#include "slcnn/optim.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

LabeledTensors::LabeledTensors(std::span<const LabeledGrid> docs, const VocabEmbeddings& embeddings)
    : docs_(docs), embeddings_(&embeddings) {}

LabeledTensors::LabeledTensors(std::span<const LabeledGrid> docs, const VocabEmbeddings& embeddings,
                               std::vector<std::size_t> subset)
    : docs_(docs), embeddings_(&embeddings), subset_(std::move(subset)) {
  for (const auto i : *subset_) {
    if (i >= docs_.size()) throw ShapeError("LabeledTensors: subset index out of range");
  }
}

LabeledTensors LabeledTensors::subset(std::vector<std::size_t> indices) const {
  if (subset_) {
    for (auto& i : indices) i = subset_->at(i);
  }
  return LabeledTensors(docs_, *embeddings_, std::move(indices));
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f706f7574ULL;

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

// Per-thread scratch for a chunk of a batch.
struct Worker {
  ModelParameters<float> grads;
  FeatureMap input;
  // Set when a document in this worker's chunk fails; exceptions must not
  // leave a thread.
  std::optional<std::string> failure;
};

void zero(ModelParameters<float>& p) { p.fill(0.0f); }

void add_into(ModelParameters<float>& dst, const ModelParameters<float>& src, const ModelConfig& config) {
  auto d = dst.views(config);
  const auto s = src.views(config);
  for (std::size_t b = 0; b < d.size(); ++b) {
    for (std::size_t i = 0; i < d[b].values.size(); ++i) d[b].values[i] += s[b].values[i];
  }
}

std::string first_non_finite_block(const Model& model) {
  const auto views = model.parameters().views(model.config());
  for (const auto& v : views) {
    for (const float x : v.values) {
      if (!std::isfinite(x)) return v.name;
    }
  }
  return "none (parameters finite; the loss overflowed)";
}

}  // namespace

TrainResult train(Model model, const LabeledTensors& train_set, const LabeledTensors* val_set,
                  const TrainOptions& options) {
  const ModelConfig config = model.config();
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  if (train_set.embed_dim() != config.embed_dim) throw ShapeError("train: embedding dimension mismatch");

  // Hold out a validation split if none was given.
  std::optional<LabeledTensors> split_train;
  std::optional<LabeledTensors> split_val;
  const LabeledTensors* training = &train_set;
  const LabeledTensors* validation = val_set;
  if (!val_set && options.val_fraction > 0 && train_set.size() >= 2) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(mix_seed(config.seed, kSplitStream));
    split_rng.shuffle(std::span<std::size_t>(order));
    auto held = static_cast<std::size_t>(std::llround(options.val_fraction * static_cast<double>(order.size())));
    held = std::clamp<std::size_t>(held, 1, order.size() - 1);
    split_val = train_set.subset(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held)));
    split_train = train_set.subset(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(held), order.end()));
    training = &*split_train;
    validation = &*split_val;
  }

  const std::size_t n = training->size();
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  TrainResult result{TrainReport{}, model, std::nullopt};
  Model& current = result.final_model;
  auto& report = result.report;
  report.batch_size = config.batch_size;
  report.threads = threads;
  report.train_documents = n;
  report.val_documents = validation ? validation->size() : 0;

  std::vector<Worker> workers(threads);
  for (auto& w : workers) {
    w.grads = current.zero_gradients();
    w.input = FeatureMap(config.doc_threshold, config.sentence_threshold, config.embed_dim);
  }
  AdamState<float> adam;
  adam.options.learning_rate = config.learning_rate;

  Rng shuffle_rng(mix_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(n);
  std::vector<double> doc_loss(n);
  std::vector<std::uint8_t> doc_correct(n);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = Clock::now();
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    const std::uint64_t epoch_seed = mix_seed(mix_seed(config.seed, kDropoutStream), epoch);

    for (std::size_t begin = 0, batch = 1; begin < n; begin += config.batch_size, ++batch) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::size_t used = std::min(threads, end - begin);
      const std::size_t per = (end - begin + used - 1) / used;

      auto run_chunk = [&](std::size_t w) {
        Worker& worker = workers[w];
        zero(worker.grads);
        worker.failure.reset();
        const std::size_t lo = begin + w * per;
        const std::size_t hi = std::min(end, lo + per);
        for (std::size_t p = lo; p < hi; ++p) {
          const std::size_t doc = order[p];
          try {
            training->tensor(doc, worker.input);
            const auto label = training->label(doc);
            const auto step = current.forward_backward(worker.input, label, Mode::kTrain, mix_seed(epoch_seed, p),
                                                       worker.grads);
            doc_loss[doc] = step.loss;
            doc_correct[doc] = argmax(std::span<const float>(step.logits)) == label ? 1 : 0;
          } catch (const NumericError& e) {
            worker.failure = "document " + std::to_string(doc) + ": " + e.what();
            return;
          }
        }
      };
      if (used == 1) {
        run_chunk(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < used; ++w) pool.emplace_back(run_chunk, w);
      }
      for (std::size_t w = 0; w < used; ++w) {
        if (workers[w].failure) {
          throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ", " +
                              *workers[w].failure + "; first non-finite parameter block: " +
                              first_non_finite_block(current));
        }
      }
      for (std::size_t w = 1; w < used; ++w) add_into(workers[0].grads, workers[w].grads, config);

      for (std::size_t p = begin; p < end; ++p) {
        if (!std::isfinite(doc_loss[order[p]])) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch) + "; first non-finite parameter block: " +
                              first_non_finite_block(current));
        }
      }

      const float scale = 1.0f / static_cast<float>(end - begin);
      auto grad_views = workers[0].grads.views(config);
      for (auto& v : grad_views) {
        for (auto& g : v.values) g *= scale;
      }
      auto param_views = current.parameters().views(config);
      std::vector<ParameterBlock<float>> blocks;
      blocks.reserve(param_views.size());
      for (std::size_t b = 0; b < param_views.size(); ++b) {
        blocks.push_back({param_views[b].name, param_views[b].values, grad_views[b].values});
      }
      try {
        adam_step(std::span<const ParameterBlock<float>>(blocks), adam);
      } catch (const NumericError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + e.what());
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t d = 0; d < n; ++d) {
      loss_sum += doc_loss[d];
      correct += doc_correct[d];
    }
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (validation && validation->size() > 0) {
      m.val_accuracy = evaluate_accuracy(current, *validation);
      if (!report.best_val_accuracy || *m.val_accuracy > *report.best_val_accuracy) {
        report.best_val_accuracy = m.val_accuracy;
        report.best_epoch = epoch;
        result.best_model = current;
      }
    }
    m.seconds = std::chrono::duration<double>(Clock::now() - started).count();
    report.epochs.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
  }
  if (options.evaluate_train_at_end) report.final_train_accuracy = evaluate_accuracy(current, *training);
  return result;
}

EvalResult evaluate(const Model& model, const LabeledTensors& data) {
  const auto& config = model.config();
  EvalResult r;
  r.total = data.size();
  r.confusion.assign(config.num_classes, std::vector<std::size_t>(config.num_classes, 0));
  FeatureMap input(config.doc_threshold, config.sentence_threshold, config.embed_dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.tensor(i, input);
    const auto logits = model.logits(input);
    const auto predicted = argmax(std::span<const float>(logits));
    const auto label = data.label(i);
    if (label >= config.num_classes) throw ShapeError("evaluate: label outside the model's classes");
    ++r.confusion[label][predicted];
    if (predicted == label) ++r.correct;
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

double evaluate_accuracy(const Model& model, const LabeledTensors& data) { return evaluate(model, data).accuracy; }

nlohmann::json TrainReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"train_accuracy", e.train_accuracy},
                           {"val_accuracy", optional_json(e.val_accuracy)},
                           {"seconds", e.seconds}});
  }
  return {
      {"schema", "slcnn.train_report/1"},
      {"batch_size", batch_size},
      {"threads", threads},
      {"train_documents", train_documents},
      {"val_documents", val_documents},
      {"epochs", epochs_json},
      {"best_epoch", best_epoch ? nlohmann::json(*best_epoch) : nlohmann::json()},
      {"best_val_accuracy", optional_json(best_val_accuracy)},
      {"final_train_accuracy", optional_json(final_train_accuracy)},
      {"test_accuracy_final", optional_json(test_accuracy_final)},
      {"test_accuracy_best", optional_json(test_accuracy_best)},
  };
}

nlohmann::json EvalResult::to_json() const {
  return {{"schema", "slcnn.eval/1"},
          {"accuracy", accuracy},
          {"correct", correct},
          {"total", total},
          {"confusion", confusion}};
}

}  // namespace slcnn
