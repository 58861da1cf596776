#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "slcnn/corpus.hpp"
#include "slcnn/embedding.hpp"
#include "slcnn/model.hpp"

namespace slcnn {

// Labeled grids plus the embedding rows they index; tensors are built on
// demand. Optionally restricted to a subset of the grids.
class LabeledTensors {
 public:
  LabeledTensors(std::span<const LabeledGrid> docs, const VocabEmbeddings& embeddings);
  LabeledTensors(std::span<const LabeledGrid> docs, const VocabEmbeddings& embeddings,
                 std::vector<std::size_t> subset);

  std::size_t size() const noexcept { return subset_ ? subset_->size() : docs_.size(); }
  std::size_t label(std::size_t i) const { return doc(i).label; }
  const LabeledGrid& doc(std::size_t i) const { return docs_[subset_ ? (*subset_)[i] : i]; }
  void tensor(std::size_t i, FeatureMap& out) const { tensorize_into(doc(i).grid, *embeddings_, out); }
  std::size_t embed_dim() const noexcept { return embeddings_->dim(); }

  LabeledTensors subset(std::vector<std::size_t> indices) const;

 private:
  std::span<const LabeledGrid> docs_;
  const VocabEmbeddings* embeddings_;
  std::optional<std::vector<std::size_t>> subset_;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_accuracy = 0;  // train-mode predictions seen during the epoch
  std::optional<double> val_accuracy;
  double seconds = 0;
};

struct TrainReport {
  std::size_t batch_size = 0;
  std::size_t threads = 1;
  std::size_t train_documents = 0;
  std::size_t val_documents = 0;
  std::vector<EpochMetrics> epochs;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_val_accuracy;
  std::optional<double> final_train_accuracy;  // eval mode, after the last epoch
  std::optional<double> test_accuracy_final;
  std::optional<double> test_accuracy_best;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::size_t threads = 1;
  // Fraction of the training set held out for validation when no
  // validation set is passed; 0 disables the split.
  double val_fraction = 0.05;
  bool evaluate_train_at_end = true;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  Model final_model;
  std::optional<Model> best_model;  // highest validation accuracy, if validated

  const Model& selected() const { return best_model ? *best_model : final_model; }
};

// Mini-batch Adam on mean softmax cross-entropy over config.epochs epochs.
// Each epoch reshuffles with an Rng derived from config.seed; dropout masks
// are keyed by (seed, epoch, position), so runs are bit-reproducible for a
// fixed thread count. Per-document gradients are summed in batch order
// within each thread's contiguous chunk, and chunks are summed in order.
TrainResult train(Model model, const LabeledTensors& train_set, const LabeledTensors* val_set,
                  const TrainOptions& options = {});

struct EvalResult {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  nlohmann::json to_json() const;
};

// Fraction of argmax(logits) == label, eval mode; ties go to the lowest
// class index.
EvalResult evaluate(const Model& model, const LabeledTensors& data);
double evaluate_accuracy(const Model& model, const LabeledTensors& data);

}  // namespace slcnn
