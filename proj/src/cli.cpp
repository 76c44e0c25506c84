#include "dactx/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "dactx/checkpoint.hpp"
#include "dactx/synth.hpp"

namespace dactx {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  hp.validate();
  model.validate();
  if (corpus_train.empty() || corpus_validation.empty() || corpus_test.empty()) {
    throw ConfigError("corpus_train, corpus_validation and corpus_test are required "
                      "(or corpus_dir)");
  }
  if (out_dir.empty()) throw ConfigError("out_dir is required");
  if (!reference_dataset.empty() && reference_dataset != "mrda" && reference_dataset != "swda") {
    throw ConfigError("reference_dataset must be mrda or swda");
  }
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::string join_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t embedding_seed(const Hyperparameters& hp) {
  return hp.seed ^ 0x9bb0c3a1f6d54e7bull;
}

}  // namespace

namespace {

// Applies one config key; returns false when the key is not a config key.
bool apply_config_kv(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "model") c.model.kind = model_kind_from_string(value);
  else if (key == "cell") c.model.cell = cell_kind_from_string(value);
  else if (key == "n_context") c.model.n_context = std::stoi(value);
  else if (key == "corpus_dir") {
    c.corpus_train = value + "/train.tsv";
    c.corpus_validation = value + "/validation.tsv";
    c.corpus_test = value + "/test.tsv";
  } else if (key == "corpus_train") c.corpus_train = value;
  else if (key == "corpus_validation") c.corpus_validation = value;
  else if (key == "corpus_test") c.corpus_test = value;
  else if (key == "embedding_path") c.embedding_path = value;
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "reference_dataset") c.reference_dataset = value;
  else if (key == "filter_widths") c.hp.filter_widths = parse_int_list(value);
  else if (key == "feature_maps") c.hp.feature_maps = std::stoi(value);
  else if (key == "dropout_rate") c.hp.dropout_rate = std::stod(value);
  else if (key == "activation") c.hp.activation = value;
  else if (key == "pooling") c.hp.pooling = value;
  else if (key == "mini_batch_size") c.hp.mini_batch_size = std::stoi(value);
  else if (key == "embedding_dim") c.hp.embedding_dim = std::stoi(value);
  else if (key == "epochs") c.hp.epochs = std::stoi(value);
  else if (key == "lr0") c.hp.lr0 = std::stod(value);
  else if (key == "lr_decay") c.hp.lr_decay = std::stod(value);
  else if (key == "lr_decay_every") c.hp.lr_decay_every = std::stoi(value);
  else if (key == "seed") c.hp.seed = std::stoull(value);
  else if (key == "hidden_size") c.hp.hidden_size = std::stoi(value);
  else if (key == "init_scale") c.hp.init_scale = std::stod(value);
  else if (key == "rnn_init_scale") c.hp.rnn_init_scale = std::stod(value);
  else if (key == "forget_bias") c.hp.forget_bias = std::stod(value);
  else if (key == "embedding_init_scale") c.hp.embedding_init_scale = std::stod(value);
  else if (key == "averaging_start") c.hp.averaging_start = std::stoi(value);
  else if (key == "max_len") c.hp.max_len = std::stoi(value);
  else return false;
  return true;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  RunConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (!apply_config_kv(c, key, value)) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": value out of range for '" +
                        key + "'");
    }
  }
  return c;
}

std::vector<std::pair<std::string, std::string>> config_kv(const RunConfig& c,
                                                           int resolved_max_len) {
  return {
      {"model", to_string(c.model.kind)},
      {"cell", to_string(c.model.cell)},
      {"n_context", std::to_string(c.model.n_context)},
      {"corpus_train", c.corpus_train},
      {"corpus_validation", c.corpus_validation},
      {"corpus_test", c.corpus_test},
      {"embedding_path", c.embedding_path},
      {"out_dir", c.out_dir},
      {"reference_dataset", c.reference_dataset},
      {"filter_widths", join_int_list(c.hp.filter_widths)},
      {"feature_maps", std::to_string(c.hp.feature_maps)},
      {"dropout_rate", fmt_double(c.hp.dropout_rate)},
      {"activation", c.hp.activation},
      {"pooling", c.hp.pooling},
      {"mini_batch_size", std::to_string(c.hp.mini_batch_size)},
      {"embedding_dim", std::to_string(c.hp.embedding_dim)},
      {"epochs", std::to_string(c.hp.epochs)},
      {"lr0", fmt_double(c.hp.lr0)},
      {"lr_decay", fmt_double(c.hp.lr_decay)},
      {"lr_decay_every", std::to_string(c.hp.lr_decay_every)},
      {"seed", std::to_string(c.hp.seed)},
      {"hidden_size", std::to_string(c.hp.hidden_size)},
      {"init_scale", fmt_double(c.hp.init_scale)},
      {"rnn_init_scale", fmt_double(c.hp.rnn_init_scale)},
      {"forget_bias", fmt_double(c.hp.forget_bias)},
      {"embedding_init_scale", fmt_double(c.hp.embedding_init_scale)},
      {"averaging_start", std::to_string(c.hp.averaging_start)},
      {"max_len", std::to_string(resolved_max_len)},
  };
}

namespace {

RunConfig config_from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
  RunConfig c;
  // run metadata keys (vocab_size, label.N, ...) are simply not config keys
  for (const auto& [k, v] : kv) apply_config_kv(c, k, v);
  return c;
}

EmbeddingTable build_embeddings(const RunConfig& config, const Corpus& corpus) {
  if (!config.embedding_path.empty()) {
    return load_pretrained(config.embedding_path, corpus.vocab, config.hp.embedding_dim,
                           config.hp.embedding_init_scale, embedding_seed(config.hp));
  }
  return init_random(corpus.vocab.size(), config.hp.embedding_dim,
                     config.hp.embedding_init_scale, embedding_seed(config.hp));
}

int resolve_max_len(const RunConfig& config, const Corpus& corpus) {
  if (config.hp.max_len > 0) return config.hp.max_len;
  return std::max(1, length_percentile(corpus, 0.96));
}

void write_kv_file(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void write_confusion_csv(const std::string& path, const EvalResult& result,
                         const LabelSet& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "gold\\pred";
  for (int j = 0; j < labels.size(); ++j) out << ',' << labels.name(j);
  out << '\n';
  for (int i = 0; i < labels.size(); ++i) {
    out << labels.name(i);
    for (int j = 0; j < labels.size(); ++j) out << ',' << result.confusion[i][j];
    out << '\n';
  }
}

ModelParams model_from_checkpoint(const Checkpoint& ckpt, const RunConfig& config,
                                  int num_classes, const std::string& prefix) {
  Rng rng(config.hp.seed);
  ModelParams model =
      init_model(config.model, config.hp.embedding_dim, num_classes, config.hp.filter_widths,
                 config.hp.feature_maps, config.hp.hidden_size, config.hp.init_scale,
                 config.hp.rnn_init_scale, config.hp.forget_bias, rng);
  for (auto& slot : model.param_slots()) {
    const Tensor* stored = ckpt.find_tensor(prefix + slot.first);
    if (!stored) {
      throw DataFormatError("checkpoint is missing tensor '" + prefix + slot.first + "'");
    }
    if (stored->shape() != slot.second->shape()) {
      throw DataFormatError("checkpoint tensor '" + prefix + slot.first + "' has shape " +
                            shape_str(stored->shape()) + ", expected " +
                            shape_str(slot.second->shape()));
    }
    *slot.second = *stored;
  }
  return model;
}

std::vector<std::pair<std::string, std::string>> run_meta(
    const RunConfig& config, const Corpus& corpus, int max_len, const TrainResult& result) {
  auto kv = config_kv(config, max_len);
  kv.emplace_back("vocab_size", std::to_string(corpus.vocab.size()));
  kv.emplace_back("num_classes", std::to_string(corpus.labels.size()));
  for (int i = 0; i < corpus.labels.size(); ++i) {
    kv.emplace_back("label." + std::to_string(i), corpus.labels.name(i));
  }
  kv.emplace_back("best_epoch", std::to_string(result.best_epoch));
  kv.emplace_back("best_val_accuracy", fmt_double(result.best_val_accuracy));
  kv.emplace_back("update_count", std::to_string(result.state.update_count));
  return kv;
}

}  // namespace

TrainOutcome run_train(const RunConfig& config) {
  config.validate();
  Corpus corpus = load_corpus(config.corpus_train, config.corpus_validation, config.corpus_test);
  const int max_len = resolve_max_len(config, corpus);
  EmbeddingTable table = build_embeddings(config, corpus);

  // Inputs are sound; only now is the run directory created.
  TrainResult result = train(corpus, config.model, config.hp, table, max_len);

  fs::create_directories(config.out_dir);
  TrainOutcome outcome;
  outcome.run_dir = config.out_dir;
  outcome.best_epoch = result.best_epoch;
  outcome.best_val_accuracy = result.best_val_accuracy;

  outcome.metrics_path = config.out_dir + "/metrics.csv";
  write_metrics_csv(outcome.metrics_path, result.metrics);
  write_kv_file(config.out_dir + "/config.resolved", config_kv(config, max_len));

  std::vector<std::pair<std::string, Tensor>> tensors;
  for (const auto& nt : result.best_model().named_params()) {
    tensors.emplace_back("avg." + nt.first, nt.second);
  }
  for (const auto& nt :
       clone_with_values(result.state.model, result.best_live).named_params()) {
    tensors.emplace_back("live." + nt.first, nt.second);
  }
  outcome.checkpoint_path = config.out_dir + "/checkpoint.dcn";
  save_checkpoint(outcome.checkpoint_path, run_meta(config, corpus, max_len, result), tensors);

  EvalResult test = evaluate(result.best_model(), table,
                             make_context_windows(corpus, "test", config.model.n_context),
                             max_len);
  outcome.test_accuracy = test.accuracy;
  write_confusion_csv(config.out_dir + "/confusion_test.csv", test, corpus.labels);
  return outcome;
}

TrainOutcome cmd_train(const std::string& config_path) {
  return run_train(load_run_config(config_path));
}

EvalOutcome cmd_eval(const std::string& checkpoint_path, const std::string& corpus_dir,
                     const std::string& split, bool majority, const std::string& out_dir) {
  Corpus corpus = load_corpus(corpus_dir + "/train.tsv", corpus_dir + "/validation.tsv",
                              corpus_dir + "/test.tsv");
  EvalOutcome outcome;
  if (majority) {
    outcome.accuracy = majority_class_accuracy(corpus, split);
    outcome.total = corpus.utterance_count(split);
    return outcome;
  }

  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig config = config_from_kv(ckpt.meta);

  const int num_classes = std::stoi(ckpt.require_meta("num_classes"));
  if (num_classes != corpus.labels.size()) {
    throw DataFormatError("checkpoint was trained with " + std::to_string(num_classes) +
                          " classes but the corpus has " + std::to_string(corpus.labels.size()));
  }
  for (int i = 0; i < num_classes; ++i) {
    if (ckpt.require_meta("label." + std::to_string(i)) != corpus.labels.name(i)) {
      throw DataFormatError("checkpoint label set does not match the corpus");
    }
  }
  const int vocab_size = std::stoi(ckpt.require_meta("vocab_size"));
  if (vocab_size != corpus.vocab.size()) {
    throw DataFormatError("checkpoint was trained with vocabulary size " +
                          std::to_string(vocab_size) + " but the corpus rebuilds " +
                          std::to_string(corpus.vocab.size()));
  }

  const int max_len = config.hp.max_len;
  EmbeddingTable table = build_embeddings(config, corpus);
  ModelParams model = model_from_checkpoint(ckpt, config, num_classes, "avg.");
  EvalResult result =
      evaluate(model, table, make_context_windows(corpus, split, config.model.n_context), max_len);

  outcome.accuracy = result.accuracy;
  outcome.mean_loss = result.mean_loss;
  outcome.total = result.total;

  const std::string dir =
      out_dir.empty() ? fs::path(checkpoint_path).parent_path().string() : out_dir;
  if (!dir.empty()) {
    outcome.confusion_path = dir + "/confusion_" + split + ".csv";
    write_confusion_csv(outcome.confusion_path, result, corpus.labels);
  }
  return outcome;
}

std::vector<SweepRow> cmd_sweep(const std::string& config_path, int n_from, int n_to) {
  if (n_from < 0 || n_to < n_from) throw ConfigError("sweep range must satisfy 0 <= from <= to");
  RunConfig base = load_run_config(config_path);
  std::vector<SweepRow> rows;
  for (int n = n_from; n <= n_to; ++n) {
    RunConfig config = base;
    config.model.n_context = n;
    config.out_dir = base.out_dir + "/n" + std::to_string(n);
    TrainOutcome outcome = run_train(config);
    SweepRow row;
    row.n_context = n;
    row.test_accuracy = outcome.test_accuracy;
    row.reference =
        reference_accuracy(config.reference_dataset, config.model.kind, config.model.cell, n);
    rows.push_back(row);
  }
  fs::create_directories(base.out_dir);
  std::ofstream out(base.out_dir + "/sweep.csv");
  if (!out) throw IoError("cannot write " + base.out_dir + "/sweep.csv");
  out << "n_context,test_accuracy,reference\n";
  for (const SweepRow& r : rows) {
    out << r.n_context << ',' << fmt_double(r.test_accuracy) << ',';
    if (r.reference > 0) out << fmt_double(r.reference);
    out << '\n';
  }
  return rows;
}

void cmd_gen_synth(const std::string& grammar_path, std::uint64_t seed,
                   const std::string& out_dir) {
  SynthGrammar grammar = load_grammar(grammar_path);
  write_synth_corpus(grammar, seed, out_dir);
}

double reference_accuracy(const std::string& dataset, ModelKind kind, CellKind cell,
                          int n_context) {
  if (dataset != "mrda" && dataset != "swda") return 0.0;
  const bool mrda = dataset == "mrda";
  // context-length sweep, best model per dataset
  if (n_context >= 1 && n_context <= 5) {
    static const double mrda_by_n[] = {83.8, 83.9, 84.3, 84.0, 84.0};
    static const double swda_by_n[] = {73.1, 73.8, 73.5, 73.1, 72.9};
    const bool best_model = mrda ? (kind == ModelKind::kRnnInputAttention &&
                                    cell == CellKind::kLstm)
                                 : (kind == ModelKind::kRnnOutputAttention &&
                                    cell == CellKind::kLstm);
    if (best_model) return (mrda ? mrda_by_n : swda_by_n)[n_context - 1];
  }
  switch (kind) {
    case ModelKind::kBaselineI: return mrda ? 83.6 : 71.3;
    case ModelKind::kBaselineII: return mrda ? 83.5 : 72.6;
    case ModelKind::kMax: return mrda ? 58.5 : 48.0;
    case ModelKind::kAttention: return mrda ? 83.5 : 72.4;
    case ModelKind::kRnn:
      return cell == CellKind::kLstm ? (mrda ? 83.8 : 73.1) : (mrda ? 83.8 : 72.8);
    case ModelKind::kRnnOutputAttention:
      return cell == CellKind::kLstm ? (mrda ? 84.1 : 73.8) : (mrda ? 84.0 : 73.1);
    case ModelKind::kRnnInputAttention:
      return cell == CellKind::kLstm ? (mrda ? 84.3 : 73.3) : (mrda ? 83.6 : 73.1);
  }
  return 0.0;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"dialog act classification with neural context models"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, corpus_dir, split = "test", grammar_path, out_dir;
  bool majority = false;
  int n_from = 1, n_to = 5;
  std::uint64_t seed = 1;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", config_path, "run config path")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path");
  eval_cmd->add_option("--corpus", corpus_dir, "corpus directory")->required();
  eval_cmd->add_option("--split", split, "train | validation | test");
  eval_cmd->add_flag("--majority", majority, "report the majority-class baseline");
  eval_cmd->add_option("--out", out_dir, "directory for the confusion report");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train across a context-length range");
  sweep_cmd->add_option("--config", config_path, "run config path")->required();
  sweep_cmd->add_option("--n-from", n_from, "first context length");
  sweep_cmd->add_option("--n-to", n_to, "last context length");

  CLI::App* gen_cmd = app.add_subcommand("gen-synth", "generate a synthetic corpus");
  gen_cmd->add_option("--grammar", grammar_path, "grammar config path")->required();
  gen_cmd->add_option("--seed", seed, "generator seed");
  gen_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error: [config] %s\n", e.what());
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      TrainOutcome o = cmd_train(config_path);
      std::printf("run directory: %s\n", o.run_dir.c_str());
      std::printf("best epoch %d, validation accuracy %.4f\n", o.best_epoch,
                  o.best_val_accuracy);
      std::printf("test accuracy %.4f\n", o.test_accuracy);
    } else if (eval_cmd->parsed()) {
      if (!majority && checkpoint_path.empty()) {
        throw ConfigError("--checkpoint is required unless --majority is given");
      }
      EvalOutcome o = cmd_eval(checkpoint_path, corpus_dir, split, majority, out_dir);
      std::printf("accuracy %.4f\n", o.accuracy);
      if (!o.confusion_path.empty())
        std::printf("confusion counts: %s\n", o.confusion_path.c_str());
    } else if (sweep_cmd->parsed()) {
      auto rows = cmd_sweep(config_path, n_from, n_to);
      std::printf("n_context  test_accuracy  reference\n");
      for (const SweepRow& r : rows) {
        if (r.reference > 0) {
          std::printf("%9d  %13.4f  %8.1f%%\n", r.n_context, r.test_accuracy, r.reference);
        } else {
          std::printf("%9d  %13.4f  %9s\n", r.n_context, r.test_accuracy, "-");
        }
      }
    } else if (gen_cmd->parsed()) {
      cmd_gen_synth(grammar_path, seed, out_dir);
      std::printf("wrote corpus to %s\n", out_dir.c_str());
    }
  } catch (const Error& e) {
    const char* category = e.exit_code() == 2   ? "config"
                           : e.exit_code() == 3 ? "io"
                           : e.exit_code() == 4 ? "data"
                                                : "numeric";
    std::fprintf(stderr, "error: [%s] %s\n", category, e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: [internal] %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace dactx
