#include "dactx/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dactx/checkpoint.hpp"
#include "dactx/synth.hpp"
#include "doctest.h"

using namespace dactx;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Hyperparameters small_hp() {
  Hyperparameters hp;
  hp.embedding_dim = 8;
  hp.feature_maps = 2;
  hp.hidden_size = 4;
  hp.mini_batch_size = 10;
  hp.epochs = 3;
  hp.init_scale = 0.05;
  hp.seed = 42;
  return hp;
}

struct TrainFixture {
  SynthGrammar grammar;
  Corpus corpus;
  EmbeddingTable table;
  Hyperparameters hp;
  int max_len = 3;

  explicit TrainFixture(double ambiguity = 0.0, int train_convs = 4, std::uint64_t seed = 5) {
    grammar.ambiguous_rate = ambiguity;
    grammar.train_conversations = train_convs;
    grammar.validation_conversations = 2;
    grammar.test_conversations = 2;
    corpus = synth_corpus(grammar, seed);
    hp = small_hp();
    table = init_random(corpus.vocab.size(), hp.embedding_dim, hp.embedding_init_scale, seed);
  }
};

ModelParams tiny_model(const Corpus& corpus, const Hyperparameters& hp, ModelKind kind,
                       CellKind cell, int n) {
  Rng rng(hp.seed);
  return init_model({kind, cell, n}, hp.embedding_dim, corpus.labels.size(), hp.filter_widths,
                    hp.feature_maps, hp.hidden_size, hp.init_scale, hp.rnn_init_scale,
                    hp.forget_bias, rng);
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("classify posterior") {
  Rng rng(1);
  Tape tape;
  Tensor rep = Tensor::from_data({3}, {0.3, -0.5, 0.9});
  Tensor w = Tensor::zeros({4, 3});
  Tensor b = Tensor::zeros({4});
  Tensor post = classify(tape, rep, w, b, 0.5, false, rng);
  for (double p : post.data()) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));

  // logits [0, ln 3] -> [0.25, 0.75]
  Tensor w2 = Tensor::zeros({2, 3});
  Tensor b2 = Tensor::from_data({2}, {0.0, std::log(3.0)});
  Tensor post2 = classify(tape, rep, w2, b2, 0.5, false, rng);
  CHECK(post2.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(post2.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

  // eval mode is dropout-free and bit-deterministic
  Rng r1(9), r2(1234);
  Tensor wq = Tensor::uniform_param({4, 3}, 0.7, r1);
  Tensor bq = Tensor::uniform_param({4}, 0.7, r1);
  Tensor a = classify(tape, rep, wq, bq, 0.5, false, r1);
  Tensor c = classify(tape, rep, wq, bq, 0.5, false, r2);
  CHECK(a.data() == c.data());
}

TEST_CASE("cross entropy values") {
  Tape tape;
  Tensor uniform = Tensor::from_data({4}, {0.25, 0.25, 0.25, 0.25});
  CHECK(cross_entropy(tape, uniform, 2).value() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Tensor sure = Tensor::from_data({3}, {0.0, 1.0, 0.0});
  CHECK(cross_entropy(tape, sure, 1).value() == 0.0);
  CHECK_THROWS_AS(cross_entropy(tape, sure, 3), ShapeError);

  // the log-space route agrees with -log(softmax)
  Rng rng(3);
  Tensor logits = Tensor::uniform_param({5}, 2.0, rng);
  Tensor direct = cross_entropy(tape, softmax(tape, logits), 4);
  Tensor fused = cross_entropy_with_logits(tape, logits, 4);
  CHECK(direct.value() == doctest::Approx(fused.value()).epsilon(1e-12));
}

TEST_CASE("batch loss equals the mean of per-example losses") {
  Rng rng(4);
  Tape tape;
  std::vector<double> losses;
  Tensor batch;
  for (int i = 0; i < 5; ++i) {
    Tensor logits = Tensor::from_data({3}, {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    Tensor l = cross_entropy_with_logits(tape, logits, i % 3);
    losses.push_back(l.value());
    batch = batch.defined() ? add(tape, batch, l) : l;
  }
  batch = scale(tape, batch, 1.0 / 5.0);
  double mean = 0.0;
  for (double l : losses) mean += l / 5.0;
  CHECK(batch.value() == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("learning rate schedule") {
  Hyperparameters hp;
  CHECK(lr_at(hp, 0) == 0.1);
  CHECK(lr_at(hp, 1999) == 0.1);
  CHECK(lr_at(hp, 2000) == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(lr_at(hp, 4500) == doctest::Approx(0.081).epsilon(1e-15));
  CHECK(lr_at(hp, 99999) == doctest::Approx(0.1 * std::pow(0.9, 49)).epsilon(1e-12));
  for (std::int64_t k : {0, 1, 1999, 2000, 2001, 39999, 40000, 100000}) {
    const double expect = 0.1 * std::pow(0.9, static_cast<double>(k / 2000));
    CHECK(lr_at(hp, k) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("asgd single step and running mean") {
  TrainFixture fx;
  ModelParams model = tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0);
  // zero every parameter, then apply one step with a known gradient
  for (Tensor t : model.trainable())
    for (double& v : t.data()) v = 0.0;
  TrainState state{model};
  state.zero_grads();
  auto slots = state.model.param_slots();
  Rng rng(8);
  std::vector<std::vector<double>> grads;
  for (auto& s : slots) {
    auto& g = s.second->grad();
    for (double& v : g) v = rng.uniform(-1, 1);
    grads.push_back(g);
  }
  Hyperparameters hp = fx.hp;
  asgd_step(state, hp);
  for (std::size_t gi = 0; gi < slots.size(); ++gi) {
    for (std::size_t i = 0; i < grads[gi].size(); ++i) {
      CHECK(slots[gi].second->data()[i] == doctest::Approx(-0.1 * grads[gi][i]).epsilon(1e-15));
      CHECK(state.averaged[gi][i] == slots[gi].second->data()[i]);  // first average == live
    }
  }

  // constant gradient for three steps: averaged == mean of the three iterates
  TrainState s3{tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0)};
  std::vector<std::vector<double>> iterate_sum;
  for (int step = 0; step < 3; ++step) {
    s3.zero_grads();
    auto sl = s3.model.param_slots();
    for (auto& s : sl)
      for (double& v : s.second->grad()) v = 0.25;
    asgd_step(s3, hp);
    for (std::size_t gi = 0; gi < sl.size(); ++gi) {
      if (step == 0) iterate_sum.push_back(sl[gi].second->data());
      else
        for (std::size_t i = 0; i < iterate_sum[gi].size(); ++i)
          iterate_sum[gi][i] += sl[gi].second->data()[i];
    }
  }
  for (std::size_t gi = 0; gi < iterate_sum.size(); ++gi)
    for (std::size_t i = 0; i < iterate_sum[gi].size(); ++i)
      CHECK(s3.averaged[gi][i] == doctest::Approx(iterate_sum[gi][i] / 3.0).epsilon(1e-12));
}

TEST_CASE("running-mean identity holds over 500 random steps") {
  TrainFixture fx;
  TrainState state{tiny_model(fx.corpus, fx.hp, ModelKind::kRnn, CellKind::kGru, 1)};
  Hyperparameters hp = fx.hp;
  Rng rng(77);
  std::vector<std::vector<double>> mean_of_iterates;
  for (int step = 0; step < 500; ++step) {
    state.zero_grads();
    auto slots = state.model.param_slots();
    for (auto& s : slots)
      for (double& v : s.second->grad()) v = rng.uniform(-0.5, 0.5);
    asgd_step(state, hp);
    for (std::size_t gi = 0; gi < slots.size(); ++gi) {
      const auto& live = slots[gi].second->data();
      if (step == 0) mean_of_iterates.push_back(live);
      else
        for (std::size_t i = 0; i < live.size(); ++i)
          mean_of_iterates[gi][i] += (live[i] - mean_of_iterates[gi][i]) / (step + 1.0);
    }
  }
  double worst = 0.0;
  for (std::size_t gi = 0; gi < mean_of_iterates.size(); ++gi)
    for (std::size_t i = 0; i < mean_of_iterates[gi].size(); ++i)
      worst = std::max(worst, std::abs(mean_of_iterates[gi][i] - state.averaged[gi][i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("asgd rejects non-finite gradients with the group name") {
  TrainFixture fx;
  TrainState state{tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0)};
  state.zero_grads();
  state.model.clf_weight.grad()[0] = std::nan("");
  CHECK_THROWS_WITH_AS(asgd_step(state, fx.hp), doctest::Contains("clf.weight"), NumericError);
}

TEST_CASE("averaging can be postponed") {
  TrainFixture fx;
  Hyperparameters hp = fx.hp;
  hp.averaging_start = 3;  // averaging begins at the third update
  TrainState state{tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0)};
  for (int step = 0; step < 2; ++step) {
    state.zero_grads();
    auto slots = state.model.param_slots();
    for (auto& s : slots)
      for (double& v : s.second->grad()) v = 0.5;
    asgd_step(state, hp);
    // before the start point the average mirrors the live parameters
    for (std::size_t gi = 0; gi < slots.size(); ++gi)
      CHECK(state.averaged[gi] == slots[gi].second->data());
  }
  CHECK(state.averaged_count == 0);
}

TEST_CASE("training overfits an unambiguous corpus") {
  TrainFixture fx(0.0, 10, 5);
  Hyperparameters hp = fx.hp;
  hp.epochs = 30;
  hp.mini_batch_size = 5;
  hp.dropout_rate = 0.0;
  hp.init_scale = 0.25;
  hp.embedding_init_scale = 0.5;
  EmbeddingTable table =
      init_random(fx.corpus.vocab.size(), hp.embedding_dim, hp.embedding_init_scale, 5);
  ContextModelConfig config{ModelKind::kBaselineI, CellKind::kLstm, 0};
  TrainResult result = train(fx.corpus, config, hp, table, fx.max_len);
  bool reached = false;
  for (const MetricsRow& r : result.metrics)
    if (r.split == "train" && r.accuracy == 1.0) reached = true;
  CHECK(reached);
  CHECK(result.best_epoch >= 0);
  CHECK(result.metrics.size() == static_cast<std::size_t>(2 * hp.epochs));
}

TEST_CASE("training is deterministic and keeps frozen embeddings intact") {
  TrainFixture fx(0.4, 6, 9);
  Hyperparameters hp = fx.hp;
  hp.epochs = 4;
  ContextModelConfig config{ModelKind::kRnn, CellKind::kLstm, 1};

  const std::vector<double> table_before = fx.table.matrix.data();
  TrainResult a = train(fx.corpus, config, hp, fx.table, fx.max_len);
  CHECK(fx.table.matrix.data() == table_before);  // frozen embeddings untouched

  TrainResult b = train(fx.corpus, config, hp, fx.table, fx.max_len);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].accuracy == b.metrics[i].accuracy);
    CHECK(a.metrics[i].loss == b.metrics[i].loss);
  }

  const auto dir = std::filesystem::temp_directory_path();
  write_metrics_csv((dir / "dactx_m1.csv").string(), a.metrics);
  write_metrics_csv((dir / "dactx_m2.csv").string(), b.metrics);
  CHECK(slurp((dir / "dactx_m1.csv").string()) == slurp((dir / "dactx_m2.csv").string()));
}

TEST_CASE("validation uses averaged parameters, which diverge from live ones") {
  TrainFixture fx(0.0, 6, 3);
  Hyperparameters hp = fx.hp;
  hp.epochs = 5;
  ContextModelConfig config{ModelKind::kBaselineI, CellKind::kLstm, 0};
  TrainResult result = train(fx.corpus, config, hp, fx.table, fx.max_len);

  auto probe = make_context_windows(fx.corpus, "validation", 0);
  EvalResult with_avg = evaluate(result.state.averaged_model(), fx.table, probe, fx.max_len);
  std::vector<std::vector<double>> live_values;
  for (const auto& nt : result.state.model.named_params()) live_values.push_back(nt.second.data());
  EvalResult with_live =
      evaluate(clone_with_values(result.state.model, live_values), fx.table, probe, fx.max_len);
  CHECK(with_avg.mean_loss != with_live.mean_loss);

  // the recorded validation accuracy comes from the averaged parameters
  double last_val = -1.0;
  for (const MetricsRow& r : result.metrics)
    if (r.split == "validation") last_val = r.accuracy;
  CHECK(last_val == with_avg.accuracy);
}

TEST_CASE("evaluation is pure and consistent with majority baseline") {
  TrainFixture fx(0.0, 5, 21);
  ModelParams model = tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0);
  auto windows = make_context_windows(fx.corpus, "test", 0);

  std::vector<std::vector<double>> before;
  for (const auto& nt : model.named_params()) before.push_back(nt.second.data());
  EvalResult r1 = evaluate(model, fx.table, windows, fx.max_len);
  EvalResult r2 = evaluate(model, fx.table, windows, fx.max_len);
  CHECK(r1.accuracy == r2.accuracy);
  CHECK(r1.mean_loss == r2.mean_loss);
  std::size_t gi = 0;
  for (const auto& nt : model.named_params()) CHECK(nt.second.data() == before[gi++]);

  // confusion counts sum to the split size
  std::int64_t total = 0;
  for (const auto& row : r1.confusion)
    for (auto v : row) total += v;
  CHECK(total == static_cast<std::int64_t>(windows.size()));

  // a classifier that always outputs the train-majority label measures
  // exactly majority_class_accuracy
  ModelParams majority = tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0);
  for (Tensor t : majority.trainable())
    for (double& v : t.data()) v = 0.0;
  majority.clf_bias.data()[majority_train_label(fx.corpus)] = 5.0;
  EvalResult mres = evaluate(majority, fx.table, windows, fx.max_len);
  CHECK(mres.accuracy ==
        doctest::Approx(majority_class_accuracy(fx.corpus, "test")).epsilon(1e-12));
}

TEST_CASE("initial loss on a balanced corpus is close to ln C") {
  TrainFixture fx(0.0, 30, 13);
  ModelParams model = tiny_model(fx.corpus, fx.hp, ModelKind::kBaselineI, CellKind::kLstm, 0);
  auto windows = make_context_windows(fx.corpus, "train", 0);
  EvalResult r = evaluate(model, fx.table, windows, fx.max_len);
  const double lnC = std::log(static_cast<double>(fx.corpus.labels.size()));
  CHECK(r.mean_loss > 0.95 * lnC);
  CHECK(r.mean_loss < 1.05 * lnC);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(6);
  std::vector<std::pair<std::string, Tensor>> tensors = {
      {"live.a", Tensor::uniform_param({3, 4}, 1.0, rng)},
      {"avg.a", Tensor::uniform_param({3, 4}, 1.0, rng)},
      {"live.b", Tensor::from_data({2}, {-0.0, 1e-300})},
  };
  std::vector<std::pair<std::string, std::string>> meta = {
      {"model", "RNN"}, {"cell", "LSTM"}, {"labels.0", "L0"}};
  const std::string path =
      (std::filesystem::temp_directory_path() / "dactx_ckpt_rt.dcn").string();
  save_checkpoint(path, meta, tensors);

  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.require_meta("model") == "RNN");
  CHECK(loaded.meta.size() == meta.size());
  REQUIRE(loaded.tensors.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded.tensors[i].first == tensors[i].first);
    CHECK(loaded.tensors[i].second.shape() == tensors[i].second.shape());
    CHECK(loaded.tensors[i].second.data() == tensors[i].second.data());  // bit-exact
  }
  CHECK(loaded.find_tensor("nope") == nullptr);
  CHECK_THROWS_AS(loaded.require_meta("nope"), DataFormatError);
}

TEST_CASE("corrupted checkpoint header is rejected") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "dactx_ckpt_bad.dcn").string();
  std::ofstream(path) << "NOTACKPT v9\nmodel=RNN\n";
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("header"), DataFormatError);
  CHECK_THROWS_AS(load_checkpoint("/no/such/checkpoint.dcn"), IoError);
}

TEST_SUITE_END();
