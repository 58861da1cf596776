#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "inputs.hpp"
#include "manifest.hpp"
#include "slcnn/binary_io.hpp"
#include "slcnn/checkpoint.hpp"
#include "slcnn/corpus.hpp"
#include "slcnn/error.hpp"
#include "slcnn/grad_check.hpp"
#include "slcnn/grid_file.hpp"
#include "slcnn/layers.hpp"
#include "slcnn/model.hpp"
#include "slcnn/rng.hpp"
#include "slcnn/train.hpp"

namespace slcnn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Subset selection streams. Train and eval share one so that
// `eval --limit N --seed S` sees exactly the slice `train` fitted.
constexpr std::uint64_t kLimitStream = 0x6c696d6974ULL;
constexpr std::uint64_t kTestLimitStream = 0x746c696d6974ULL;

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string number(std::uint64_t v) { return std::to_string(v); }

std::string default_data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env ? env : "";
}

DatasetFormat parse_format(const std::string& s) {
  if (s == "csv") return DatasetFormat::kCsv;
  if (s == "jsonl") return DatasetFormat::kJsonLines;
  return DatasetFormat::kAuto;
}

std::size_t parse_fc(const std::string& s) { return s == "large" ? kLargeFcUnits : kSmallFcUnits; }
std::string fc_name(std::size_t units) {
  if (units == kSmallFcUnits) return "small";
  if (units == kLargeFcUnits) return "large";
  return std::to_string(units);
}

void print_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

fs::path output_path(const std::string& p) { return fs::absolute(fs::path(p)); }

std::string pct(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v;
  return s.str();
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::vector<std::string> inputs;
  std::size_t ts = kDefaultSentenceThreshold;
  std::size_t td = 0;
  std::string format = "auto";
  std::vector<std::string> text_fields;
  bool strict = false;
  bool pretty = false;
};

int cmd_stats(const StatsArgs& a, bool td_given, const std::string& data_dir, std::ostream& out,
              std::ostream& err) {
  if (a.ts == 0) throw UsageError("--ts must be >= 1");
  CorpusStatsAccumulator acc(a.ts);
  std::size_t skipped = 0;
  for (const auto& in : a.inputs) {
    const auto path = resolve_input(in, data_dir);
    if (is_grid_file(path)) throw UsageError(path.string() + " is a grid file; stats needs raw text");
    LoadOptions lo;
    lo.format = parse_format(a.format);
    lo.policy = a.strict ? MalformedPolicy::kAbort : MalformedPolicy::kSkip;
    lo.schema.text_fields = a.text_fields;
    DatasetReader reader(path, lo);
    while (auto doc = reader.next()) acc.add(preprocess(*doc));
    skipped += reader.summary().skipped;
    if (reader.summary().skipped > 0) {
      err << "warning: " << path.string() << ": skipped " << reader.summary().skipped << " malformed record(s)\n";
    }
  }
  const auto stats = acc.finish(td_given ? std::optional<std::size_t>(a.td) : std::nullopt);
  auto j = stats.to_json();
  j["skipped_records"] = skipped;
  if (!a.pretty) {
    print_json(out, j);
    return kExitOk;
  }
  out << "documents                      " << stats.num_documents << '\n'
      << "sentences                      " << stats.num_sentences << '\n'
      << "mean sentences/doc (mu)        " << stats.mean_sentences_per_doc << '\n'
      << "stddev sentences/doc (sigma)   " << stats.stddev_sentences_per_doc << '\n'
      << "max sentences/doc              " << stats.max_sentences_per_doc << '\n'
      << "max words/sentence             " << stats.max_words_per_sentence << '\n'
      << "vocab size                     " << stats.vocab_size << '\n'
      << "T_d (derived)                  " << stats.derived_doc_threshold << '\n'
      << "T_s                            " << stats.sentence_threshold << '\n'
      << "cropped sentences (%)          " << pct(stats.pct_cropped_sentences) << '\n'
      << "cropped documents (%)          " << pct(stats.pct_cropped_documents) << " at T_d=" << stats.doc_threshold_used
      << '\n'
      << "docs with cropped sentences (%) " << pct(stats.pct_docs_with_cropped_sentences) << '\n';
  return kExitOk;
}

// ----------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string manifest;
  std::size_t ts = kDefaultSentenceThreshold;
  std::size_t td = 0;
  std::string format = "auto";
  std::vector<std::string> text_fields;
  bool strict = false;
  std::string embeddings;
  std::string slice_out;
  std::uint64_t oov_seed = kDefaultOovSeed;
  std::size_t embed_dim = kDefaultEmbeddingDim;
};

int cmd_preprocess(PreprocessArgs a, bool td_given, const std::string& data_dir, std::ostream& out,
                   std::ostream& err) {
  if (a.ts == 0) throw UsageError("--ts must be >= 1");
  if (!a.slice_out.empty() && a.embeddings.empty()) throw UsageError("--slice-out needs --embeddings");
  RunManifest manifest;
  manifest.command = "preprocess";
  manifest.started_at = utc_timestamp();
  manifest.tool_version = SLCNN_VERSION;

  ReadOptions ro{parse_format(a.format), a.strict, a.text_fields};
  std::vector<Source> sources;
  for (auto& in : a.inputs) {
    const auto path = resolve_input(in, data_dir);
    in = path.string();
    sources.push_back(read_source(path, ro, err));
    if (sources.back().grids) throw UsageError(in + " is already a grid file");
    manifest.inputs.push_back({"dataset", in, file_digest(path)});
  }
  if (!td_given) {
    std::vector<std::size_t> counts;
    for (const auto& s : sources) {
      const auto c = sentence_counts(s);
      counts.insert(counts.end(), c.begin(), c.end());
    }
    a.td = compute_doc_threshold(counts);
  }
  if (a.td == 0) throw UsageError("--td must be >= 1");

  GridCorpus corpus;
  corpus.doc_threshold = a.td;
  corpus.sentence_threshold = a.ts;
  for (const auto& s : sources) {
    auto grids = build_grids(s, select_subset(s.size(), std::nullopt, 0), a.td, a.ts, corpus.vocab);
    corpus.docs.insert(corpus.docs.end(), std::make_move_iterator(grids.begin()), std::make_move_iterator(grids.end()));
  }
  const auto out_path = output_path(a.out);
  write_grid_file(out_path, corpus);
  manifest.outputs.push_back({"grids", out_path.string(), file_digest(out_path)});

  if (!a.slice_out.empty()) {
    const auto emb = load_embeddings(a.embeddings, data_dir, a.embed_dim, a.oov_seed);
    const auto slice = output_path(a.slice_out);
    emb.table.save_slice(slice, corpus.vocab);
    manifest.inputs.push_back({"embeddings", emb.path, emb.digest});
    manifest.outputs.push_back({"embedding_slice", slice.string(), file_digest(slice)});
    a.embeddings = emb.path;
    a.slice_out = slice.string();
  }

  const auto manifest_path = a.manifest.empty() ? fs::path(out_path.string() + ".manifest.json") : output_path(a.manifest);
  manifest.argv = {"preprocess", "--out", out_path.string(), "--manifest", manifest_path.string(),
                   "--ts", number(std::uint64_t{a.ts}), "--td", number(std::uint64_t{a.td}), "--format", a.format};
  for (const auto& in : a.inputs) manifest.argv.insert(manifest.argv.end(), {"--input", in});
  for (const auto& f : a.text_fields) manifest.argv.insert(manifest.argv.end(), {"--text-field", f});
  if (a.strict) manifest.argv.push_back("--strict");
  if (!a.slice_out.empty()) {
    manifest.argv.insert(manifest.argv.end(), {"--embeddings", a.embeddings, "--slice-out", a.slice_out,
                                               "--oov-seed", number(a.oov_seed), "--embed-dim",
                                               number(std::uint64_t{a.embed_dim})});
  }
  manifest.config = {{"t_d", a.td}, {"t_s", a.ts}, {"format", a.format}, {"text_fields", a.text_fields},
                     {"strict", a.strict}};
  manifest.seeds = {{"oov_seed", a.oov_seed}};
  manifest.finished_at = utc_timestamp();
  manifest.save(manifest_path);

  print_json(out, {{"schema", "slcnn.preprocess/1"},
                   {"documents", corpus.docs.size()},
                   {"t_d", a.td},
                   {"t_s", a.ts},
                   {"vocab_size", corpus.vocab.size()},
                   {"output", out_path.string()},
                   {"manifest", manifest_path.string()}});
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string train;
  std::string val;
  std::string test;
  std::string variant = "slcnn";
  std::string fc = "small";
  std::size_t td = 0;
  std::size_t ts = kDefaultSentenceThreshold;
  bool custom_ts = false;
  std::size_t filters = kDefaultFilters;
  std::size_t classes = 0;
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  std::uint64_t seed = 1;
  std::size_t limit = 0;
  std::size_t test_limit = 0;
  std::size_t threads = 1;
  double val_fraction = 0.05;
  std::string embeddings = kDefaultEmbeddingsFile;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::uint64_t oov_seed = kDefaultOovSeed;
  std::string out;
  std::string report;
  std::string manifest;
  std::string format = "auto";
  std::vector<std::string> text_fields;
  bool strict = false;
  bool quiet = false;
  bool pretty = false;
};

struct TrainFlags {
  bool td = false;
  bool classes = false;
  bool limit = false;
  bool test_limit = false;
};

std::vector<std::string> canonical_train_argv(const TrainArgs& a, const TrainFlags& f) {
  std::vector<std::string> v = {"train",
                                "--train", a.train,
                                "--variant", a.variant,
                                "--fc", a.fc,
                                "--td", number(std::uint64_t{a.td}),
                                "--ts", number(std::uint64_t{a.ts}),
                                "--filters", number(std::uint64_t{a.filters}),
                                "--classes", number(std::uint64_t{a.classes}),
                                "--epochs", number(std::uint64_t{a.epochs}),
                                "--lr", number(a.lr),
                                "--batch-size", number(std::uint64_t{a.batch_size}),
                                "--dropout", number(a.dropout),
                                "--seed", number(a.seed),
                                "--threads", number(std::uint64_t{a.threads}),
                                "--val-fraction", number(a.val_fraction),
                                "--embeddings", a.embeddings,
                                "--embed-dim", number(std::uint64_t{a.embed_dim}),
                                "--oov-seed", number(a.oov_seed),
                                "--format", a.format,
                                "--out", a.out,
                                "--manifest", a.manifest};
  auto add = [&](std::initializer_list<std::string> items) { v.insert(v.end(), items); };
  if (a.custom_ts) add({"--allow-custom-ts"});
  if (!a.val.empty()) add({"--val", a.val});
  if (!a.test.empty()) add({"--test", a.test});
  if (f.limit) add({"--limit", number(std::uint64_t{a.limit})});
  if (f.test_limit) add({"--test-limit", number(std::uint64_t{a.test_limit})});
  if (!a.report.empty()) add({"--report", a.report});
  for (const auto& t : a.text_fields) add({"--text-field", t});
  if (a.strict) add({"--strict"});
  if (a.quiet) add({"--quiet"});
  return v;
}

ModelConfig config_from(const TrainArgs& a) {
  ModelConfig c;
  c.variant = parse_variant(a.variant);
  c.fc_units = parse_fc(a.fc);
  c.num_filters = a.filters;
  c.doc_threshold = a.td;
  c.sentence_threshold = a.ts;
  c.custom_sentence_threshold = a.custom_ts;
  c.embed_dim = a.embed_dim;
  c.num_classes = a.classes;
  c.seed = a.seed;
  c.learning_rate = a.lr;
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.dropout = a.dropout;
  c.oov_seed = a.oov_seed;
  return c;
}

void print_train_pretty(std::ostream& out, const TrainReport& r) {
  out << "epoch  train_loss  train_acc  val_acc  seconds\n";
  for (const auto& e : r.epochs) {
    out << std::setw(5) << e.epoch << "  " << std::setw(10) << std::fixed << std::setprecision(5) << e.train_loss
        << "  " << std::setw(9) << std::setprecision(4) << e.train_accuracy << "  " << std::setw(7)
        << (e.val_accuracy ? pct(*e.val_accuracy * 100) : std::string("-")) << "  " << std::setw(7)
        << std::setprecision(2) << e.seconds << '\n';
  }
  out.unsetf(std::ios::floatfield);
  if (r.final_train_accuracy) out << "final train accuracy  " << *r.final_train_accuracy << '\n';
  if (r.best_epoch) out << "best epoch            " << *r.best_epoch << '\n';
  if (r.test_accuracy_final) out << "test accuracy (final) " << *r.test_accuracy_final << '\n';
  if (r.test_accuracy_best) out << "test accuracy (best)  " << *r.test_accuracy_best << '\n';
}

int cmd_train(TrainArgs a, TrainFlags f, const std::string& data_dir, std::ostream& out, std::ostream& err) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.started_at = utc_timestamp();
  manifest.tool_version = SLCNN_VERSION;

  // Shape and hyperparameter checks that do not depend on data happen
  // before anything is read.
  if (a.ts != kDefaultSentenceThreshold && !a.custom_ts) {
    throw ConfigError("--ts " + std::to_string(a.ts) + " needs --allow-custom-ts (only T_s=46 collapses to width 1 "
                      "with four horizontal blocks)");
  }
  {
    ModelConfig probe = config_from(a);
    if (!f.td) probe.doc_threshold = 64;
    if (!f.classes) probe.num_classes = 2;
    probe.validate();
  }
  if (f.limit && a.limit == 0) throw UsageError("--limit must be >= 1");
  if (f.test_limit && a.test_limit == 0) throw UsageError("--test-limit must be >= 1");
  if (a.threads == 0) throw UsageError("--threads must be >= 1");
  if (!(a.val_fraction >= 0 && a.val_fraction < 1)) throw UsageError("--val-fraction must be in [0, 1)");
  if (a.test.empty() && f.test_limit) throw UsageError("--test-limit needs --test");

  ReadOptions ro{parse_format(a.format), a.strict, a.text_fields};
  auto resolve = [&](std::string& p, const char* role) {
    if (p.empty()) return;
    p = resolve_input(p, data_dir).string();
    manifest.inputs.push_back({role, p, file_digest(p)});
  };
  resolve(a.train, "train");
  resolve(a.val, "val");
  resolve(a.test, "test");
  a.out = output_path(a.out).string();
  if (a.manifest.empty()) a.manifest = a.out + ".manifest.json";
  a.manifest = output_path(a.manifest).string();
  if (!a.report.empty()) a.report = output_path(a.report).string();
  // Embeddings are resolved early so a missing file fails before training.
  if (a.embeddings != "none") a.embeddings = resolve_input(a.embeddings, data_dir).string();

  const auto train_src = read_source(a.train, ro, err);
  std::optional<Source> val_src, test_src;
  if (!a.val.empty()) val_src = read_source(a.val, ro, err);
  if (!a.test.empty()) test_src = read_source(a.test, ro, err);

  if (!f.td) {
    if (train_src.grids) {
      a.td = train_src.grids->doc_threshold;
    } else {
      a.td = compute_doc_threshold(sentence_counts(train_src));
    }
    if (!a.quiet) err << "derived T_d = " << a.td << " from " << train_src.size() << " training documents\n";
  }
  if (!f.classes) {
    std::size_t m = train_src.max_label();
    if (val_src) m = std::max(m, val_src->max_label());
    if (test_src) m = std::max(m, test_src->max_label());
    a.classes = m + 1;
  }
  ModelConfig config = config_from(a);
  config.validate();
  const Source* sources[] = {&train_src, val_src ? &*val_src : nullptr, test_src ? &*test_src : nullptr};
  for (const Source* s : sources) {
    if (s && s->max_label() >= config.num_classes) {
      throw ConfigError(s->path.string() + " has label " + std::to_string(s->max_label() + 1) + " but the model has " +
                        std::to_string(config.num_classes) + " classes");
    }
  }

  Vocabulary vocab;
  const auto train_idx = select_subset(train_src.size(), f.limit ? std::optional(a.limit) : std::nullopt,
                                       mix_seed(a.seed, kLimitStream));
  const auto train_grids = build_grids(train_src, train_idx, config.doc_threshold, config.sentence_threshold, vocab);
  std::vector<LabeledGrid> val_grids, test_grids;
  if (val_src) {
    val_grids = build_grids(*val_src, select_subset(val_src->size(), std::nullopt, 0), config.doc_threshold,
                            config.sentence_threshold, vocab);
  }
  if (test_src) {
    const auto idx = select_subset(test_src->size(), f.test_limit ? std::optional(a.test_limit) : std::nullopt,
                                   mix_seed(a.seed, kTestLimitStream));
    test_grids = build_grids(*test_src, idx, config.doc_threshold, config.sentence_threshold, vocab);
  }

  auto emb = load_embeddings(a.embeddings, data_dir, config.embed_dim, config.oov_seed);
  if (a.embeddings != "none") manifest.inputs.push_back({"embeddings", emb.path, emb.digest});
  config.embedding_digest = emb.digest;
  const VocabEmbeddings rows(vocab, emb.table);
  if (!a.quiet) {
    err << "train " << train_grids.size() << " docs, vocab " << vocab.size() - 1 << ", embeddings " << emb.path << " ("
        << emb.table.size() << " vectors), model " << to_string(config.variant) << "/" << a.fc << " with "
        << count_parameters(config) << " parameters\n";
  }

  const LabeledTensors train_set(train_grids, rows);
  const LabeledTensors val_set(val_grids, rows);
  const LabeledTensors test_set(test_grids, rows);

  TrainOptions options;
  options.threads = a.threads;
  options.val_fraction = a.val_fraction;
  if (!a.quiet) {
    options.on_epoch = [&err, epochs = config.epochs](const EpochMetrics& m) {
      err << "epoch " << m.epoch << "/" << epochs << "  loss " << m.train_loss << "  train_acc " << m.train_accuracy;
      if (m.val_accuracy) err << "  val_acc " << *m.val_accuracy;
      err << "  (" << m.seconds << " s)\n";
    };
  }
  auto result = train(Model::build(config), train_set, val_src ? &val_set : nullptr, options);
  if (test_src) {
    result.report.test_accuracy_final = evaluate_accuracy(result.final_model, test_set);
    if (result.best_model) result.report.test_accuracy_best = evaluate_accuracy(*result.best_model, test_set);
  }

  save_checkpoint(result.selected(), a.out);
  manifest.outputs.push_back({"checkpoint", a.out, file_digest(a.out)});

  json report = result.report.to_json();
  report["config"] = config.to_json();
  report["parameters"] = count_parameters(config);
  report["checkpoint"] = a.out;
  report["checkpoint_weights"] = result.best_model ? "best_val" : "final";
  if (!a.report.empty()) {
    write_json_file(a.report, report);
    manifest.outputs.push_back({"report", a.report, file_digest(a.report), false});
  }

  manifest.argv = canonical_train_argv(a, f);
  manifest.config = config.to_json();
  manifest.config["threads"] = a.threads;
  manifest.config["val_fraction"] = a.val_fraction;
  manifest.config["limit"] = f.limit ? json(a.limit) : json();
  manifest.config["test_limit"] = f.test_limit ? json(a.test_limit) : json();
  manifest.config["embeddings"] = emb.path;
  manifest.config["format"] = a.format;
  manifest.config["text_fields"] = a.text_fields;
  manifest.seeds = {{"seed", config.seed},
                    {"oov_seed", config.oov_seed},
                    {"limit_seed", mix_seed(a.seed, kLimitStream)},
                    {"test_limit_seed", mix_seed(a.seed, kTestLimitStream)}};
  manifest.finished_at = utc_timestamp();
  manifest.save(a.manifest);

  if (a.pretty) {
    print_train_pretty(out, result.report);
  } else {
    print_json(out, report);
  }
  return kExitOk;
}

// ------------------------------------------------------ eval and predict

std::string default_embeddings_for(const ModelConfig& config) {
  return config.embedding_digest == "none" ? "none" : kDefaultEmbeddingsFile;
}

LoadedEmbeddings embeddings_for_model(const std::string& spec, const ModelConfig& config, const std::string& data_dir,
                                      std::ostream& err) {
  auto emb = load_embeddings(spec.empty() ? default_embeddings_for(config) : spec, data_dir, config.embed_dim,
                             config.oov_seed);
  if (!config.embedding_digest.empty() && emb.digest != config.embedding_digest) {
    err << "warning: embeddings " << emb.path << " (digest " << emb.digest << ") differ from the ones the model was "
        << "trained with (digest " << config.embedding_digest << ")\n";
  }
  return emb;
}

struct EvalArgs {
  std::string model;
  std::string input;
  std::string embeddings;
  std::size_t limit = 0;
  std::uint64_t seed = 1;
  std::string format = "auto";
  std::vector<std::string> text_fields;
  bool strict = false;
  bool pretty = false;
};

int cmd_eval(const EvalArgs& a, bool limit_given, const std::string& data_dir, std::ostream& out, std::ostream& err) {
  const auto model_path = resolve_input(a.model, data_dir);
  const auto input = resolve_input(a.input, data_dir);
  const Model model = load_checkpoint(model_path);
  const auto& config = model.config();
  const auto src = read_source(input, ReadOptions{parse_format(a.format), a.strict, a.text_fields}, err);
  if (src.max_label() >= config.num_classes) {
    throw ConfigError(input.string() + " has label " + std::to_string(src.max_label() + 1) + " but the model has " +
                      std::to_string(config.num_classes) + " classes");
  }
  Vocabulary vocab;
  const auto idx = select_subset(src.size(), limit_given ? std::optional(a.limit) : std::nullopt,
                                 mix_seed(a.seed, kLimitStream));
  const auto grids = build_grids(src, idx, config.doc_threshold, config.sentence_threshold, vocab);
  const auto emb = embeddings_for_model(a.embeddings, config, data_dir, err);
  const VocabEmbeddings rows(vocab, emb.table);
  const auto result = evaluate(model, LabeledTensors(grids, rows));
  if (a.pretty) {
    out << "accuracy " << result.accuracy << " (" << result.correct << "/" << result.total << ")\n"
        << "confusion (rows: true label, columns: predicted)\n";
    for (std::size_t t = 0; t < result.confusion.size(); ++t) {
      out << std::setw(4) << t + 1 << " |";
      for (const auto c : result.confusion[t]) out << std::setw(8) << c;
      out << '\n';
    }
    return kExitOk;
  }
  auto j = result.to_json();
  j["model"] = model_path.string();
  j["input"] = input.string();
  print_json(out, j);
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::vector<std::string> texts;
  std::string text_file;
  std::string embeddings;
};

int cmd_predict(const PredictArgs& a, const std::string& data_dir, std::ostream& out, std::ostream& err) {
  const Model model = load_checkpoint(resolve_input(a.model, data_dir));
  const auto& config = model.config();
  auto texts = a.texts;
  if (!a.text_file.empty()) {
    std::ifstream f(resolve_input(a.text_file, data_dir));
    for (std::string line; std::getline(f, line);) texts.push_back(line);
  }
  if (texts.empty()) throw UsageError("predict needs --text or --text-file");
  const auto emb = embeddings_for_model(a.embeddings, config, data_dir, err);
  auto predictions = json::array();
  for (const auto& text : texts) {
    Vocabulary vocab;
    const auto grid = crop_pad(preprocess(RawDocument{0, {text}}), config.doc_threshold, config.sentence_threshold,
                               vocab);
    const auto doc = tensorize(grid, vocab, emb.table);
    const auto logits = model.logits(doc.tensor);
    const std::vector<double> wide(logits.begin(), logits.end());
    const auto probs = softmax(std::span<const double>(wide));
    const auto predicted = argmax(std::span<const float>(logits));
    predictions.push_back({{"predicted", predicted},
                           {"label", predicted + 1},
                           {"probabilities", probs},
                           {"sentences", grid.real_sentence_count()}});
  }
  print_json(out, {{"schema", "slcnn.predict/1"}, {"predictions", predictions}});
  return kExitOk;
}

// ------------------------------------------------------ params, gradcheck

struct ParamsArgs {
  std::string variant = "slcnn";
  std::string fc = "small";
  std::size_t td = 4;
  std::size_t classes = 4;
  std::size_t filters = kDefaultFilters;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  bool table = false;
  bool pretty = false;
};

json params_row(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)}, {"fc", fc_name(c.fc_units)},   {"t_d", c.doc_threshold},
          {"num_classes", c.num_classes},    {"flatten", c.flatten_size()}, {"parameters", count_parameters(c)}};
}

int cmd_params(const ParamsArgs& a, std::ostream& out) {
  auto rows = json::array();
  if (a.table) {
    struct Dataset {
      const char* name;
      std::size_t td;
      std::size_t classes;
    };
    const Dataset datasets[] = {{"AG", 4, 4},        {"DBPedia", 6, 14},   {"Yelp.P", 20, 2},
                                {"Yelp.F", 20, 5},   {"Amazon.P", 10, 2}, {"Amazon.F", 10, 5}};
    for (const auto& d : datasets) {
      for (const auto v : {Variant::kSlcnn, Variant::kSlcnnV}) {
        for (const auto units : {kSmallFcUnits, kLargeFcUnits}) {
          ModelConfig c;
          c.variant = v;
          c.fc_units = units;
          c.doc_threshold = d.td;
          c.num_classes = d.classes;
          auto row = params_row(c);
          row["dataset"] = d.name;
          rows.push_back(row);
        }
      }
    }
  } else {
    ModelConfig c;
    c.variant = parse_variant(a.variant);
    c.fc_units = parse_fc(a.fc);
    c.doc_threshold = a.td;
    c.num_classes = a.classes;
    c.num_filters = a.filters;
    c.embed_dim = a.embed_dim;
    auto row = params_row(c);
    auto layers = json::array();
    const auto p = make_parameters<float>(c);
    for (const auto& v : p.views(c)) layers.push_back({{"name", v.name}, {"shape", v.shape}, {"count", v.values.size()}});
    row["layers"] = layers;
    rows.push_back(row);
  }
  if (!a.pretty) {
    print_json(out, {{"schema", "slcnn.params/1"}, {"rows", rows}});
    return kExitOk;
  }
  for (const auto& r : rows) {
    if (r.contains("dataset")) out << std::setw(9) << std::left << r["dataset"].get<std::string>() << std::right;
    out << std::setw(8) << r["variant"].get<std::string>() << std::setw(6) << r["fc"].get<std::string>()
        << "  T_d=" << std::setw(2) << r["t_d"].get<std::size_t>() << "  C=" << std::setw(2)
        << r["num_classes"].get<std::size_t>() << std::setw(10) << r["parameters"].get<std::size_t>() << '\n';
    if (r.contains("layers")) {
      for (const auto& l : r["layers"]) {
        out << "  " << std::setw(20) << std::left << l["name"].get<std::string>() << std::right << std::setw(10)
            << l["count"].get<std::size_t>() << '\n';
      }
    }
  }
  return kExitOk;
}

struct GradCheckArgs {
  std::string variant = "slcnn";
  std::size_t td = 4;
  std::size_t filters = 4;
  std::size_t fc = 8;
  std::size_t classes = 3;
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 1;
  double epsilon = GradCheckOptions{}.epsilon;
  double tolerance = 1e-5;
};

// Float64 check of the whole network's backward pass against central
// differences, on a shrunken configuration with dropout active under a
// fixed mask. Probes that cross a ReLU kink or max-pool tie are excluded.
int cmd_gradcheck(const GradCheckArgs& a, std::ostream& out) {
  ModelConfig c;
  c.variant = parse_variant(a.variant);
  c.doc_threshold = a.td;
  c.num_filters = a.filters;
  c.fc_units = a.fc;
  c.num_classes = a.classes;
  c.embed_dim = a.embed_dim;
  c.seed = a.seed;
  auto model = Model::build(c).cast<double>();
  BasicFeatureMap<double> doc(c.doc_threshold, c.sentence_threshold, c.embed_dim);
  Rng rng(mix_seed(a.seed, 0x646f63ULL));
  for (auto& v : doc.data()) v = rng.uniform(-1, 1);
  // Small positive biases keep most ReLUs active so the check exercises
  // every layer.
  for (auto& view : model.parameters().views(c)) {
    if (view.name.ends_with(".bias")) {
      for (auto& b : view.values) b = rng.uniform(0.0, 0.1);
    }
  }
  const std::size_t label = a.classes - 1;
  const std::uint64_t dropout_seed = mix_seed(a.seed, 0x6d61736bULL);
  GradCheckOptions options;
  options.epsilon = a.epsilon;
  const auto result = grad_check_model(std::move(model), doc, label, Mode::kTrain, dropout_seed, options);
  auto j = result.to_json();
  j["tolerance"] = a.tolerance;
  j["passed"] = result.max_relative_error < a.tolerance;
  j["config"] = c.to_json();
  print_json(out, j);
  return result.max_relative_error < a.tolerance ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- rerun

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err, bool allow_rerun);

struct RerunArgs {
  std::string manifest;
  bool verify = false;
  bool force = false;
};

int cmd_rerun(const RerunArgs& a, const std::string& data_dir, std::ostream& out, std::ostream& err) {
  const auto path = resolve_input(a.manifest, data_dir);
  const auto manifest = RunManifest::load(path);
  if (manifest.argv.empty() || manifest.argv.front() == "rerun") throw UsageError("manifest has no rerunnable command");
  for (const auto& in : manifest.inputs) {
    if (!fs::exists(in.path)) throw UsageError("manifest input missing: " + in.path);
    const auto d = file_digest(in.path);
    if (d != in.digest) {
      if (!a.force) throw UsageError("input " + in.path + " changed since the run (digest " + d + ", recorded " + in.digest + ")");
      err << "warning: input " << in.path << " changed since the run\n";
    }
  }
  if (manifest.tool_version != SLCNN_VERSION) {
    err << "warning: manifest written by version " << manifest.tool_version << ", running " << SLCNN_VERSION << '\n';
  }
  std::ostringstream sink;
  const int code = dispatch(manifest.argv, a.verify ? static_cast<std::ostream&>(sink) : out, err, false);
  if (code != kExitOk || !a.verify) return code;

  auto outputs = json::array();
  bool identical = true;
  for (const auto& o : manifest.outputs) {
    const auto d = fs::exists(o.path) ? file_digest(o.path) : std::string("missing");
    const bool same = d == o.digest;
    if (o.deterministic && !same) identical = false;
    outputs.push_back({{"role", o.role}, {"path", o.path}, {"recorded", o.digest}, {"digest", d},
                       {"identical", same}, {"deterministic", o.deterministic}});
  }
  print_json(out, {{"schema", "slcnn.rerun/1"}, {"identical", identical}, {"outputs", outputs}});
  return identical ? kExitOk : kExitFailure;
}

// ------------------------------------------------------------- dispatch

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err, bool allow_rerun) {
  CLI::App app{"Sentence-level CNN text classification", "slcnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SLCNN_VERSION);
  std::string data_dir = default_data_dir();
  app.add_option("--data-dir", data_dir, std::string("Directory for relative inputs (default $") + kDataDirEnv + ")");

  const std::vector<std::string> formats = {"auto", "csv", "jsonl"};
  const std::vector<std::string> variants = {"slcnn", "slcnn+v"};
  const std::vector<std::string> fc_sizes = {"small", "large"};

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Corpus statistics and the derived T_d");
  stats->add_option("--input", st.inputs, "Dataset file (repeatable; train and test are pooled)")->required();
  stats->add_option("--ts", st.ts, "Words-per-sentence threshold")->capture_default_str();
  auto* stats_td = stats->add_option("--td", st.td, "T_d used for the cropped-documents percentage");
  stats->add_option("--format", st.format)->check(CLI::IsMember(formats))->capture_default_str();
  stats->add_option("--text-field", st.text_fields, "JSON-lines text keys in join order (default: text)");
  stats->add_flag("--strict", st.strict, "Abort on the first malformed record");
  stats->add_flag("--pretty", st.pretty, "Human-readable table instead of JSON");

  PreprocessArgs pp;
  auto* prep = app.add_subcommand("preprocess", "Write token grids (and optionally an embedding slice)");
  prep->add_option("--input", pp.inputs, "Dataset file (repeatable)")->required();
  prep->add_option("--out", pp.out, "Grid file to write")->required();
  prep->add_option("--manifest", pp.manifest, "Run manifest path (default <out>.manifest.json)");
  prep->add_option("--ts", pp.ts)->capture_default_str();
  auto* prep_td = prep->add_option("--td", pp.td, "Sentences per document (default: derived)");
  prep->add_option("--format", pp.format)->check(CLI::IsMember(formats))->capture_default_str();
  prep->add_option("--text-field", pp.text_fields);
  prep->add_flag("--strict", pp.strict);
  prep->add_option("--embeddings", pp.embeddings, "GloVe file to slice");
  prep->add_option("--slice-out", pp.slice_out, "Write the vocabulary's embedding rows here");
  prep->add_option("--oov-seed", pp.oov_seed)->capture_default_str();
  prep->add_option("--embed-dim", pp.embed_dim)->capture_default_str();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint, report and run manifest");
  trn->add_option("--train", tr.train, "Training dataset or grid file")->required();
  trn->add_option("--val", tr.val, "Validation set (default: a seeded split of --train)");
  trn->add_option("--test", tr.test, "Test set evaluated after training");
  trn->add_option("--variant", tr.variant)->check(CLI::IsMember(variants))->capture_default_str();
  trn->add_option("--fc", tr.fc, "Dense layer size")->check(CLI::IsMember(fc_sizes))->capture_default_str();
  auto* trn_td = trn->add_option("--td", tr.td, "Sentences per document (default: derived from --train)");
  trn->add_option("--ts", tr.ts)->capture_default_str();
  trn->add_flag("--allow-custom-ts", tr.custom_ts, "Permit T_s other than 46");
  trn->add_option("--filters", tr.filters)->capture_default_str();
  auto* trn_classes = trn->add_option("--classes", tr.classes, "Number of classes (default: from labels)");
  trn->add_option("--epochs", tr.epochs)->capture_default_str();
  trn->add_option("--lr", tr.lr)->capture_default_str();
  trn->add_option("--batch-size", tr.batch_size)->capture_default_str();
  trn->add_option("--dropout", tr.dropout)->capture_default_str();
  trn->add_option("--seed", tr.seed)->capture_default_str();
  auto* trn_limit = trn->add_option("--limit", tr.limit, "Train on the first N documents after a seeded shuffle");
  auto* trn_test_limit = trn->add_option("--test-limit", tr.test_limit, "Same for --test");
  trn->add_option("--threads", tr.threads)->capture_default_str();
  trn->add_option("--val-fraction", tr.val_fraction, "Held-out share of --train when --val is absent")
      ->capture_default_str();
  trn->add_option("--embeddings", tr.embeddings, "GloVe or slice file, or none")->capture_default_str();
  trn->add_option("--embed-dim", tr.embed_dim)->capture_default_str();
  trn->add_option("--oov-seed", tr.oov_seed)->capture_default_str();
  trn->add_option("--out", tr.out, "Checkpoint path")->required();
  trn->add_option("--report", tr.report, "Also write the report JSON here");
  trn->add_option("--manifest", tr.manifest, "Run manifest path (default <out>.manifest.json)");
  trn->add_option("--format", tr.format)->check(CLI::IsMember(formats))->capture_default_str();
  trn->add_option("--text-field", tr.text_fields);
  trn->add_flag("--strict", tr.strict);
  trn->add_flag("--quiet", tr.quiet, "No per-epoch log");
  trn->add_flag("--pretty", tr.pretty);

  EvalArgs ev;
  auto* evl = app.add_subcommand("eval", "Accuracy and confusion matrix of a checkpoint");
  evl->add_option("--model", ev.model)->required();
  evl->add_option("--input", ev.input)->required();
  evl->add_option("--embeddings", ev.embeddings, "Default: what the model was trained with");
  auto* evl_limit = evl->add_option("--limit", ev.limit, "Evaluate the slice `train --limit N --seed S` used");
  evl->add_option("--seed", ev.seed)->capture_default_str();
  evl->add_option("--format", ev.format)->check(CLI::IsMember(formats))->capture_default_str();
  evl->add_option("--text-field", ev.text_fields);
  evl->add_flag("--strict", ev.strict);
  evl->add_flag("--pretty", ev.pretty);

  PredictArgs pr;
  auto* pred = app.add_subcommand("predict", "Class probabilities for raw texts");
  pred->add_option("--model", pr.model)->required();
  pred->add_option("--text", pr.texts, "Text to classify (repeatable)");
  pred->add_option("--text-file", pr.text_file, "One text per line");
  pred->add_option("--embeddings", pr.embeddings);

  ParamsArgs pa;
  auto* prm = app.add_subcommand("params", "Trainable parameter count of a configuration");
  prm->add_option("--variant", pa.variant)->check(CLI::IsMember(variants))->capture_default_str();
  prm->add_option("--fc", pa.fc)->check(CLI::IsMember(fc_sizes))->capture_default_str();
  prm->add_option("--td", pa.td)->capture_default_str();
  prm->add_option("--classes", pa.classes)->capture_default_str();
  prm->add_option("--filters", pa.filters)->capture_default_str();
  prm->add_option("--embed-dim", pa.embed_dim)->capture_default_str();
  prm->add_flag("--table", pa.table, "All six benchmark datasets, both variants and sizes");
  prm->add_flag("--pretty", pa.pretty);

  GradCheckArgs gc;
  auto* grd = app.add_subcommand("gradcheck", "Finite-difference check of the full backward pass");
  grd->add_option("--variant", gc.variant)->check(CLI::IsMember(variants))->capture_default_str();
  grd->add_option("--td", gc.td)->capture_default_str();
  grd->add_option("--filters", gc.filters)->capture_default_str();
  grd->add_option("--fc", gc.fc)->capture_default_str();
  grd->add_option("--classes", gc.classes)->capture_default_str();
  grd->add_option("--embed-dim", gc.embed_dim)->capture_default_str();
  grd->add_option("--seed", gc.seed)->capture_default_str();
  grd->add_option("--epsilon", gc.epsilon)->capture_default_str();
  grd->add_option("--tolerance", gc.tolerance)->capture_default_str();

  RerunArgs rr;
  CLI::App* rer = nullptr;
  if (allow_rerun) {
    rer = app.add_subcommand("rerun", "Repeat a run from its manifest");
    rer->add_option("--manifest", rr.manifest)->required();
    rer->add_flag("--verify", rr.verify, "Compare the new outputs with the recorded digests");
    rer->add_flag("--force", rr.force, "Run even if inputs changed");
  }

  std::vector<const char*> argv{"slcnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (stats->parsed()) return cmd_stats(st, stats_td->count() > 0, data_dir, out, err);
    if (prep->parsed()) return cmd_preprocess(pp, prep_td->count() > 0, data_dir, out, err);
    if (trn->parsed()) {
      TrainFlags f{trn_td->count() > 0, trn_classes->count() > 0, trn_limit->count() > 0, trn_test_limit->count() > 0};
      return cmd_train(tr, f, data_dir, out, err);
    }
    if (evl->parsed()) return cmd_eval(ev, evl_limit->count() > 0, data_dir, out, err);
    if (pred->parsed()) return cmd_predict(pr, data_dir, out, err);
    if (prm->parsed()) return cmd_params(pa, out);
    if (grd->parsed()) return cmd_gradcheck(gc, out);
    if (rer && rer->parsed()) return cmd_rerun(rr, data_dir, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  return dispatch(args, out, err, true);
}

}  // namespace slcnn::cli
