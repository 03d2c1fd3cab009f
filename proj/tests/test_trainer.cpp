#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mvan/gradcheck.hpp"
#include "mvan/text_encoder.hpp"
#include "mvan/trainer.hpp"
#include "toy.hpp"

using namespace mvan;
using ad::Tape;
using ad::Var;

namespace {

ModelConfig head_only_config() {
  ModelConfig c = toy::tiny_config(Variant::PSAN);
  c.head_hidden = 3;
  return c;
}

double batch_loss(const Model& m, const std::vector<PreparedExample>& batch) {
  double total = 0;
  for (const auto& ex : batch) total += loss(m.predict(ex).probabilities, ex.label);
  return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("predict_head examples") {
  ModelConfig c = head_only_config();
  ParameterStore p;
  p.add("head.W_tp", Tensor::matrix(2, 3));
  p.add("head.b_tp", Tensor::matrix(1, 3));
  p.add("head.W_out", Tensor::matrix(3, 2));
  p.add("head.b_out", Tensor::matrix(1, 2));
  Tape tape;
  ForwardContext ctx{tape, p};
  Var probs = predict_head(ctx, tape.constant(Tensor::row({0.3, -2})), std::nullopt);
  CHECK(probs.value() == Tensor::row({0.5, 0.5}));
  CHECK(argmax_label({0.5, 0.5}) == Label::True);

  p.at("head.b_out") = Tensor::row({2.0, 0.0});
  Tape t2;
  ForwardContext ctx2{t2, p};
  Var p2 = predict_head(ctx2, std::nullopt, t2.constant(Tensor::row({1, 1})));
  // softmax oracle: 1 / (1 + e^-2)
  CHECK(p2.value()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(p2.value()[0] == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(p2.value()[1] == doctest::Approx(0.1192).epsilon(1e-3));
  CHECK(argmax_label({p2.value()[0], p2.value()[1]}) == Label::True);
  CHECK(argmax_label({0.4, 0.6}) == Label::Fake);

  CHECK_THROWS_AS(predict_head(ctx2, t2.constant(Tensor::row({1, 1, 1})), std::nullopt), NumericError);
}

TEST_CASE("loss examples") {
  CHECK(loss({0.0, 1.0}, Label::Fake) == 0.0);
  CHECK(loss({1.0, 0.0}, Label::True) == 0.0);
  CHECK(loss({0.5, 0.5}, Label::Fake) == doctest::Approx(std::log(2.0)));
  CHECK(loss({0.5, 0.5}, Label::Fake) == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(loss({0.3, 0.7}, Label::Fake) == doctest::Approx(loss({0.7, 0.3}, Label::True)).epsilon(1e-15));
  CHECK(loss({1.0, 0.0}, Label::Fake) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("probabilities sum to one") {
  ModelConfig c = toy::tiny_config();
  auto d = toy::prepared(20, 1, c);
  Model m(c, d.vocab.size(), Rng(1));
  for (const auto& ex : d.test) {
    auto p = m.predict(ex);
    CHECK(std::abs(p.probabilities[0] + p.probabilities[1] - 1.0) < 1e-9);
  }
}

TEST_CASE("variant wiring") {
  ModelConfig base = toy::tiny_config();
  auto d = toy::prepared(24, 2, base);
  const auto& ex = d.test[0];
  const auto& other = d.test[1];

  SUBCASE("parameter groups follow the variant") {
    auto names = [&](Variant v) {
      ModelConfig c = toy::tiny_config(v);
      std::set<std::string> prefixes;
      for (const auto& [n, _] : build_variant(c, d.vocab.size(), Rng(1))) prefixes.insert(n.substr(0, n.find('.', n.find('.') + 1)));
      return prefixes;
    };
    CHECK(names(Variant::TSAN) == std::set<std::string>{"head.W_out", "head.W_tp", "head.b_out", "head.b_tp",
                                                        "text_encoder.attention", "text_encoder.embedding",
                                                        "text_encoder.gru"});
    CHECK(names(Variant::PSAN).count("text_encoder.gru") == 0);
    CHECK(names(Variant::MVAN_TSA).count("text_encoder.attention") == 0);
    CHECK(names(Variant::MVAN_PSA).count("graph_encoder.aggregator") == 1);
    CHECK(names(Variant::MVAN_PSA).count("graph_encoder.gat") == 0);
  }

  SUBCASE("TSAN ignores the graph") {
    Model m(toy::tiny_config(Variant::TSAN), d.vocab.size(), Rng(3));
    PreparedExample swapped = ex;
    swapped.graph = other.graph;
    CHECK(m.predict(ex).probabilities == m.predict(swapped).probabilities);
  }
  SUBCASE("PSAN ignores the text") {
    Model m(toy::tiny_config(Variant::PSAN), d.vocab.size(), Rng(3));
    PreparedExample swapped = ex;
    swapped.text = other.text;
    CHECK(m.predict(ex).probabilities == m.predict(swapped).probabilities);
  }
  SUBCASE("MVAN with uniform attention equals MVAN-TSA") {
    Model full(toy::tiny_config(Variant::MVAN), d.vocab.size(), Rng(4));
    full.params().at("text_encoder.attention.u_w") = Tensor::matrix(4, 1);
    ParameterStore reduced;
    for (const auto& [n, t] : full.params())
      if (n.rfind("text_encoder.attention", 0) != 0) reduced.add(n, t);
    Model tsa(toy::tiny_config(Variant::MVAN_TSA), d.vocab.size(), reduced);
    for (const auto& e : d.test) {
      auto a = full.predict(e).probabilities, b = tsa.predict(e).probabilities;
      CHECK(std::abs(a[0] - b[0]) < 1e-12);
    }
  }
  SUBCASE("mismatched parameters are rejected") {
    Model m(toy::tiny_config(Variant::MVAN), d.vocab.size(), Rng(5));
    CHECK_THROWS_AS(Model(toy::tiny_config(Variant::TSAN), d.vocab.size(), m.params()), std::invalid_argument);
    ModelConfig wider = toy::tiny_config(Variant::MVAN);
    wider.head_hidden = 5;
    CHECK_THROWS_AS(Model(wider, d.vocab.size(), m.params()), std::invalid_argument);
  }
}

TEST_CASE("variant invariances hold across random inputs") {
  ModelConfig c = toy::tiny_config();
  auto d = toy::prepared(40, 9, c);
  Model tsan(toy::tiny_config(Variant::TSAN), d.vocab.size(), Rng(1));
  Model psan(toy::tiny_config(Variant::PSAN), d.vocab.size(), Rng(1));
  for (std::size_t i = 0; i + 1 < d.train.size(); ++i) {
    PreparedExample a = d.train[i];
    a.graph = d.train[i + 1].graph;
    CHECK(tsan.predict(a).probabilities == tsan.predict(d.train[i]).probabilities);
    PreparedExample b = d.train[i];
    b.text = d.train[i + 1].text;
    CHECK(psan.predict(b).probabilities == psan.predict(d.train[i]).probabilities);
  }
}

TEST_CASE("full model gradients on a three-example batch") {
  ModelConfig c = toy::tiny_config();
  auto d = toy::prepared(20, 3, c);
  std::vector<PreparedExample> batch(d.train.begin(), d.train.begin() + 3);
  Model m(c, d.vocab.size(), Rng(7));
  auto r = check_gradients(m.params(), [&](Tape& tape, const ParameterStore& ps) {
    ForwardContext ctx{tape, ps};
    std::vector<Var> losses;
    for (const auto& ex : batch) {
      losses.push_back(ad::cross_entropy(m.forward(ctx, ex).logits, label_index(ex.label)));
    }
    return ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / 3.0);
  });
  INFO(r.worst << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("one Adam step lowers the batch loss") {
  ModelConfig c = toy::tiny_config();
  auto d = toy::prepared(20, 4, c);
  std::vector<PreparedExample> batch(d.train.begin(), d.train.begin() + 8);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Model m(c, d.vocab.size(), Rng(seed));
    const double before = batch_loss(m, batch);
    Tape tape;
    ForwardContext ctx = m.context(tape);
    std::vector<Var> losses;
    for (const auto& ex : batch) losses.push_back(ad::cross_entropy(m.forward(ctx, ex).logits, label_index(ex.label)));
    auto grads = tape.gradient(ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / 8.0));
    AdamState adam;
    adam_step(m.params(), grads, adam);
    successes += batch_loss(m, batch) < before;
  }
  CHECK(successes >= 19);
}

TEST_CASE("training determinism and zero learning rate") {
  ModelConfig c = toy::tiny_config();
  c.trainer.dropout = 0.5;
  c.trainer.epochs = 3;
  c.trainer.validation_fraction = 0.2;
  auto d = toy::prepared(30, 5, c);
  auto a = train(d.train, c, d.vocab.size());
  auto b = train(d.train, c, d.vocab.size());
  CHECK(a.model.params() == b.model.params());
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_acc == b.history[i].val_acc);
  }

  ModelConfig frozen = c;
  frozen.trainer.learning_rate = 0.0;
  auto z = train(d.train, frozen, d.vocab.size());
  Model init(frozen, d.vocab.size(), Rng(frozen.trainer.seed).substream("init"));
  CHECK(z.model.params() == init.params());
}

TEST_CASE("frozen embeddings and the pad row") {
  ModelConfig c = toy::tiny_config(Variant::TSAN);
  c.text.trainable_embeddings = false;
  c.trainer.epochs = 2;
  auto d = toy::prepared(20, 6, c);
  Model init(c, d.vocab.size(), Rng(c.trainer.seed).substream("init"));
  auto t = train(d.train, c, d.vocab.size());
  CHECK(t.model.params().at(text::kEmbeddingName) == init.params().at(text::kEmbeddingName));
  CHECK(!(t.model.params().at("head.W_out") == init.params().at("head.W_out")));

  ModelConfig trainable = toy::tiny_config(Variant::TSAN);
  trainable.trainer.epochs = 2;
  auto u = train(d.train, trainable, d.vocab.size());
  const Tensor& e = u.model.params().at(text::kEmbeddingName);
  for (std::size_t k = 0; k < e.cols(); ++k) CHECK(e(kPadIndex, k) == 0.0);
}

TEST_CASE("divergence aborts with a diagnostic") {
  ModelConfig c = toy::tiny_config(Variant::PSAN);
  c.trainer.learning_rate = 1e300;
  auto d = toy::prepared(20, 7, c);
  try {
    train(d.train, c, d.vocab.size());
    FAIL("expected divergence");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("diverged at epoch") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip predicts identically") {
  ModelConfig c = toy::tiny_config();
  c.trainer.epochs = 2;
  auto d = toy::prepared(20, 8, c);
  auto t = train(d.train, c, d.vocab.size());
  auto path = std::filesystem::temp_directory_path() / "mvan_trainer_ckpt.txt";
  save_checkpoint(t.model.params(), path);
  Model back(c, d.vocab.size(), load_checkpoint(path));
  for (const auto& ex : d.test) {
    auto a = t.model.predict(ex), b = back.predict(ex);
    CHECK(a.probabilities == b.probabilities);
    CHECK(a.word_weights == b.word_weights);
    CHECK(a.node_scores == b.node_scores);
  }
}

TEST_CASE("early-stopping history") {
  ModelConfig c = toy::tiny_config();
  c.trainer.epochs = 6;
  c.trainer.patience = 2;
  c.trainer.validation_fraction = 0.3;
  auto d = toy::prepared(30, 10, c);
  auto t = train(d.train, c, d.vocab.size());
  CHECK(!t.history.empty());
  CHECK(t.best_epoch >= 1);
  CHECK(t.best_epoch <= t.history.size());
  for (const auto& h : t.history) CHECK(h.val_acc.has_value());
  // Training stops once patience runs out after the best epoch.
  CHECK(t.history.size() <= t.best_epoch + 2);
}

TEST_CASE("early detection schedule") {
  SyntheticConfig s;
  s.n_examples = 30;
  s.mean_retweets = 8;
  s.mean_words = 5;
  auto syn = gen_synthetic(s, 11);
  ModelConfig c = toy::tiny_config();
  c.trainer.epochs = 2;
  EarlyDetectionOptions o;
  o.seed = 11;
  auto curve = early_detection_schedule(c, syn.dataset, {1.0, 0.2, 0.5}, o);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].fraction == 0.2);
  CHECK(curve[1].fraction == 0.5);
  CHECK(curve[2].fraction == 1.0);
  // Fraction 1.0 equals the standard evaluation.
  auto run = run_experiment(syn.dataset, c, 0.7, 11);
  CHECK(curve[2].metrics == run.test.metrics);

  CHECK_THROWS(early_detection_schedule(c, syn.dataset, {0.0}, o));
  CHECK_THROWS(early_detection_schedule(c, syn.dataset, {1.2}, o));
}
