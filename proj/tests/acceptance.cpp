// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [criterion numbers...]
//
// With no numbers every criterion runs. Exit status is nonzero when any
// selected criterion fails.

#include <chrono>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gat_fixtures.hpp"
#include "mvan/evaluation.hpp"
#include "mvan/gradcheck.hpp"
#include "mvan/selfcheck.hpp"
#include "mvan/synthetic.hpp"
#include "mvan/trainer.hpp"
#include "oracles.hpp"

using namespace mvan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_out = "acceptance_artifacts";

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Model used by the training criteria: small enough for one core, with the
// default dropout of 0.5.
ModelConfig small_model(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.text.embedding_dim = 8;
  c.text.hidden_size = 8;
  c.text.layers = 1;
  c.text.attention_dim = 8;
  c.text.max_len = 12;
  c.graph.heads = 2;
  c.graph.hidden_per_head = 8;
  c.graph.output_dim = 8;
  c.head_hidden = 8;
  c.trainer.batch_size = 16;
  c.trainer.learning_rate = 0.005;
  c.trainer.epochs = 60;
  c.trainer.dropout = 0.5;
  c.trainer.validation_fraction = 0.1;
  c.trainer.patience = 10;
  return c;
}

SyntheticConfig synthetic(std::size_t n, double text, double graph) {
  SyntheticConfig s;
  s.n_examples = n;
  s.text_signal_strength = text;
  s.graph_signal_strength = graph;
  s.vocab_size = 50;
  s.mean_words = 8;
  s.mean_retweets = 10;
  s.planted_fraction = 0.2;
  return s;
}

// Prepares every example of `raw` (no held-out split).
std::vector<PreparedExample> prepare_all(const Dataset& raw, const TextEncoderConfig& text, std::size_t* vocab_size) {
  std::vector<std::size_t> all(raw.examples.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<Example> imputed = raw.examples;
  impute_all(imputed);
  std::vector<std::vector<std::string>> corpus;
  for (const auto& e : imputed) corpus.push_back(tokenize(e.tweet.text));
  Vocabulary vocab = build_vocab(corpus, text.vocab_cap);
  *vocab_size = vocab.size();
  return prepare_split(raw, all, vocab, fit_feature_stats(imputed), text.max_len, 1.0);
}

std::vector<Example> imputed_split(const Dataset& raw, const std::vector<std::size_t>& idx) {
  auto out = select(raw.examples, idx);
  impute_all(out);
  return out;
}

// 1. Every parameter of the full model against central differences.
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  ToyInstance toy = toy_instance(1);
  Model m(toy.config, toy.vocab_size, Rng(1));
  auto r = check_gradients(m.params(), [&](ad::Tape& tape, const ParameterStore& ps) {
    ForwardContext ctx{tape, ps};
    std::vector<ad::Var> losses;
    for (const auto& ex : toy.examples) losses.push_back(ad::cross_entropy(m.forward(ctx, ex).logits, label_index(ex.label)));
    return ad::scale(ad::sum(ad::concat_rows(losses)), 0.5);
  });
  const double secs = seconds_since(t0);
  return {r.max_rel_error < 1e-4 && secs < 60.0,
          "max relative error " + fmt(r.max_rel_error, 3) + " over " + std::to_string(r.checked) + " scalars (" +
              r.worst + "), " + fmt(secs, 3) + " s; limits 1e-4, 60 s"};
}

// 2. Sparse layers against the dense masked-softmax oracle.
Outcome gat_oracle() {
  using namespace gat_fixtures;
  Rng rng(2);
  double worst = 0;
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const Adj& adj : {chain(n), star(n), complete(n)}) {
      for (auto mode : {graph::GatMode::ConcatElu, graph::GatMode::AverageRelu}) {
        Tensor x = uniform_tensor({n, 5}, -2, 2, rng);
        Layer l = random_layer(3, 5, 4, rng);
        auto g = graph::GraphInput::from_adjacency(x, adj);
        Tape tape;
        auto out = sparse_layer(tape, tape.constant(x), g, l, mode, 0.3);
        worst = std::max(worst, max_diff(out.output.value(), dense_layer(to_rows(x), adj, l, mode, 0.3)));
        for (std::size_t k = 0; k < l.W.size(); ++k) {
          auto d = oracle::dense_gat_head(to_rows(x), mask_of(adj), to_rows(l.W[k]), l.a[k].data(), 0.3);
          const Tensor& c = out.coeffs[k].value();
          for (std::size_t e = 0; e < g.edge_count(); ++e) {
            worst = std::max(worst, std::abs(c[e] - d.alpha[g.sources[e]][g.targets[e]]));
          }
        }
        ++cases;
      }
    }
  }
  return {worst < 1e-10, "max abs difference " + fmt(worst, 3) + " over " + std::to_string(cases) +
                             " chain/star/complete/singleton layers with 1-6 nodes; limit 1e-10"};
}

// 3. Word weights and every per-node, per-head, per-layer coefficient set.
Outcome normalization() {
  auto syn = gen_synthetic(synthetic(100, 0.5, 0.5), 3);
  ModelConfig c = small_model(Variant::MVAN);
  c.graph.layers = 3;
  std::size_t vocab = 0;
  auto examples = prepare_all(syn.dataset, c.text, &vocab);
  Model m(c, vocab, Rng(3));
  double worst = 0;
  std::size_t sets = 0;
  for (const auto& ex : examples) {
    auto p = m.predict(ex);
    double s = 0;
    for (double w : p.word_weights) s += w;
    worst = std::max(worst, std::abs(s - 1.0));
    ++sets;
    for (const auto& layer : p.edge_coeffs) {
      for (const auto& head : layer) {
        for (std::size_t i = 0; i < ex.graph.node_count(); ++i) {
          double z = 0;
          for (std::size_t e = ex.graph.offsets[i]; e < ex.graph.offsets[i + 1]; ++e) z += head[e];
          worst = std::max(worst, std::abs(z - 1.0));
          ++sets;
        }
      }
    }
  }
  return {examples.size() == 100 && worst < 1e-6, std::to_string(sets) + " weight sets over " +
                                                      std::to_string(examples.size()) + " examples, max |sum - 1| " +
                                                      fmt(worst, 3) + "; limit 1e-6"};
}

// 4. Capacity: a 20-example planted set is fit exactly.
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig s = synthetic(20, 0.9, 0.9);
  auto syn = gen_synthetic(s, 4);
  ModelConfig c = small_model(Variant::MVAN);
  c.trainer.dropout = 0.0;
  c.trainer.validation_fraction = 0.0;
  c.trainer.epochs = 200;
  c.trainer.batch_size = 4;
  std::size_t vocab = 0;
  auto examples = prepare_all(syn.dataset, c.text, &vocab);
  TrainHooks hooks;
  hooks.stop_after = [](const HistoryRow& r) { return r.train_acc == 1.0; };
  auto a = train(examples, c, vocab, nullptr, hooks);
  auto b = train(examples, c, vocab, nullptr, hooks);
  const double acc = accuracy(a.model, examples);
  const bool same = a.model.params() == b.model.params() && a.history.size() == b.history.size();
  const double secs = seconds_since(t0);
  return {acc == 1.0 && a.history.size() <= 200 && same && secs < 120.0,
          "train accuracy " + fmt(acc) + " after " + std::to_string(a.history.size()) + " epochs, rerun " +
              (same ? "identical" : "DIFFERENT") + ", " + fmt(secs, 3) + " s; limits 200 epochs, 120 s"};
}

// 5. Both views together beat either alone.
Outcome multi_view() {
  const auto t0 = std::chrono::steady_clock::now();
  auto syn = gen_synthetic(synthetic(600, 0.5, 0.5), 17);
  // Calibration: shallow oracles on the first run's split.
  Split split = split_dataset(syn.dataset.examples.size(), 0.7, Rng(1).substream("split"));
  auto tr = imputed_split(syn.dataset, split.train), te = imputed_split(syn.dataset, split.test);
  const double bow = oracle::bow_accuracy(tr, te), graph = oracle::graph_feature_accuracy(tr, te);
  const bool calibrated = std::abs(bow - 0.75) <= 0.1 && std::abs(graph - 0.75) <= 0.1;

  std::map<Variant, double> mean;
  for (Variant v : {Variant::MVAN, Variant::TSAN, Variant::PSAN}) {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      total += run_experiment(syn.dataset, small_model(v), 0.7, seed).test.metrics.accuracy;
    }
    mean[v] = total / 10.0;
  }
  const double secs = seconds_since(t0);
  const double over_text = mean[Variant::MVAN] - mean[Variant::TSAN];
  const double over_graph = mean[Variant::MVAN] - mean[Variant::PSAN];
  return {calibrated && over_text >= 0.03 && over_graph >= 0.03 && secs < 900.0,
          "oracles BoW " + fmt(bow) + " / graph " + fmt(graph) + "; 10-run means MVAN " + fmt(mean[Variant::MVAN]) +
              " TSAN " + fmt(mean[Variant::TSAN]) + " PSAN " + fmt(mean[Variant::PSAN]) + " (margins " +
              fmt(over_text, 3) + ", " + fmt(over_graph, 3) + "), " + fmt(secs, 3) +
              " s; limits 0.75+-0.1, 0.03, 900 s"};
}

struct CueStats {
  std::size_t hits = 0, total = 0;
  double rate() const { return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0; }
};

CueStats cue_fidelity(const SyntheticDataset& syn, std::uint64_t seed) {
  std::map<std::string, std::string> cue;
  for (const auto& t : syn.truth)
    if (t.cue_token) cue[t.tweet_id] = *t.cue_token;
  auto r = run_experiment(syn.dataset, small_model(Variant::MVAN), 0.7, seed);
  CueStats s;
  for (std::size_t i = 0; i < r.data.test.size(); ++i) {
    const auto& ex = r.data.test[i];
    if (ex.label != Label::Fake || r.test.predictions[i].predicted != Label::Fake) continue;
    auto it = cue.find(ex.tweet_id);
    if (it == cue.end()) continue;
    auto e = explain(ex, r.test.predictions[i]);
    auto top = std::max_element(e.word_weights.begin(), e.word_weights.end());
    s.hits += e.words[static_cast<std::size_t>(top - e.word_weights.begin())] == it->second;
    ++s.total;
  }
  return s;
}

double planted_top3_rate(const SyntheticDataset& syn, const ModelConfig& config, std::uint64_t seed) {
  std::map<std::string, std::set<std::string>> planted;
  for (const auto& t : syn.truth) planted[t.tweet_id].insert(t.shifted_users.begin(), t.shifted_users.end());
  auto r = run_experiment(syn.dataset, config, 0.7, seed);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < r.data.test.size(); ++i) {
    const auto& ex = r.data.test[i];
    if (ex.label != Label::Fake) continue;
    bool hit = false;
    for (const auto& u : top_users(explain(ex, r.test.predictions[i]), 3)) hit = hit || planted[ex.tweet_id].count(u.user_id);
    hits += hit;
    ++total;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// 6. Attention points at the planted evidence.
Outcome explanation_fidelity() {
  // Text: cue words carry the only signal.
  auto text_syn = gen_synthetic(synthetic(600, 0.9, 0.0), 101);
  Split split = split_dataset(600, 0.7, Rng(1).substream("split"));
  auto top6 = oracle::bow_top_tokens(imputed_split(text_syn.dataset, split.train), 6);
  std::set<std::string> cues(fake_cue_tokens().begin(), fake_cue_tokens().end());
  cues.insert(true_cue_tokens().begin(), true_cue_tokens().end());
  const bool text_oracle = std::set<std::string>(top6.begin(), top6.end()) == cues;
  const CueStats text = cue_fidelity(text_syn, 1);
  // Spread over other initializations, reported but not scored.
  std::size_t seeds_ok = 1 * (text.rate() >= 0.8);
  for (std::uint64_t seed = 2; seed <= 6; ++seed) seeds_ok += cue_fidelity(text_syn, seed).rate() >= 0.8;

  // Graph: the earliest 10% of retweeters of every fake tweet are planted.
  SyntheticConfig gs = synthetic(600, 0.0, 1.0);
  gs.planted_fraction = 0.1;
  gs.mean_retweets = 20;
  auto graph_syn = gen_synthetic(gs, 202);
  std::map<std::string, std::set<std::string>> planted;
  for (const auto& t : graph_syn.truth) planted[t.tweet_id].insert(t.shifted_users.begin(), t.shifted_users.end());
  auto gtr = imputed_split(graph_syn.dataset, split.train), gte = imputed_split(graph_syn.dataset, split.test);
  oracle::ProfileOutlier outlier(gtr);
  std::size_t oracle_hits = 0, oracle_total = 0;
  for (const auto& e : gte) {
    if (e.tweet.label != Label::Fake) continue;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < e.graph.size(); ++i) ranked.emplace_back(-outlier.score(e.graph.nodes[i].features), i);
    std::sort(ranked.begin(), ranked.end());
    bool hit = false;
    for (std::size_t k = 0; k < 3 && k < ranked.size(); ++k)
      hit = hit || planted[e.tweet.id].count(e.graph.nodes[ranked[k].second].user_id);
    oracle_hits += hit;
    ++oracle_total;
  }
  const double graph_oracle = static_cast<double>(oracle_hits) / static_cast<double>(oracle_total);
  const double graph_rate = planted_top3_rate(graph_syn, small_model(Variant::MVAN), 1);
  ModelConfig untrained = small_model(Variant::MVAN);
  untrained.trainer.epochs = 0;
  const double graph_untrained = planted_top3_rate(graph_syn, untrained, 1);

  return {text_oracle && text.rate() >= 0.8 && graph_oracle >= 0.9 && graph_rate >= 0.7,
          "cue is max weight in " + std::to_string(text.hits) + "/" + std::to_string(text.total) + " = " +
              fmt(text.rate()) + " of correct fakes (BoW oracle top-6 " + (text_oracle ? "= cue set" : "!= cue set") +
              "; " + std::to_string(seeds_ok) + "/6 init seeds reach 0.8); planted user in top-3 for " +
              fmt(graph_rate) + " of fakes (feature oracle " + fmt(graph_oracle) + ", untrained model " +
              fmt(graph_untrained) + "); limits 0.8, 0.7"};
}

// 7. Accuracy holds when test cascades are cut to the earliest retweeters.
Outcome early_detection() {
  SyntheticConfig s = synthetic(600, 0.0, 0.9);
  s.planted_fraction = 0.1;
  s.mean_retweets = 20;
  auto syn = gen_synthetic(s, 303);
  EarlyDetectionOptions eo;
  eo.seed = 1;
  auto curve = early_detection_schedule(small_model(Variant::MVAN), syn.dataset, {0.1, 0.2, 0.5, 1.0}, eo);
  write_text_file(g_out / "early_detection.csv", curve_csv(curve));
  const std::string csv = read_text_file(g_out / "early_detection.csv");
  const bool emitted = csv.rfind("fraction,accuracy\n0.100000,", 0) == 0;
  const double at10 = curve.front().metrics.accuracy, full = curve.back().metrics.accuracy;
  std::string points;
  for (const auto& p : curve) points += (points.empty() ? "" : " ") + fmt(p.fraction, 2) + ":" + fmt(p.metrics.accuracy);
  return {emitted && std::abs(at10 - full) <= 0.05,
          "accuracy " + points + " (|diff| " + fmt(std::abs(at10 - full), 3) + "), curve CSV " +
              (emitted ? "written" : "MISSING") + "; limit 0.05"};
}

// 8. Metrics against brute-force counting; zero spread for identical runs.
Outcome metrics_exactness() {
  Rng rng(8);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(1000);
    std::vector<Label> p(n), l(n);
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.5) ? Label::Fake : Label::True;
      l[i] = rng.bernoulli(0.4) ? Label::Fake : Label::True;
      const bool pf = p[i] == Label::Fake, lf = l[i] == Label::Fake;
      (pf ? (lf ? tp : fp) : (lf ? fn : tn)) += 1;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0, rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    auto m = metrics(confusion(p, l));
    mismatches += !(m.accuracy == (tp + tn) / static_cast<double>(n) && m.precision == prec && m.recall == rec &&
                    m.f1 == f1);
  }
  std::vector<MetricsReport> same(10, metrics({41, 37, 9, 13}));
  auto a = aggregate_runs(same);
  bool zero = true;
  for (const auto* s : {&a.accuracy, &a.precision, &a.recall, &a.f1}) {
    zero = zero && s->stddev == 0.0;
    for (double h : s->half_widths) zero = zero && h == 0.0;
  }
  return {mismatches == 0 && zero, std::to_string(mismatches) + " mismatches over 1000 random vectors; identical-run std " +
                                       (zero ? "0" : "NONZERO")};
}

// 9. Reruns are byte-identical; checkpoints restore exact predictions.
Outcome determinism() {
  auto syn = gen_synthetic(synthetic(120, 0.9, 0.9), 9);
  ModelConfig c = small_model(Variant::MVAN);
  c.trainer.epochs = 8;
  auto artifacts = [&](const fs::path& dir) {
    RunResult r = run_experiment(syn.dataset, c, 0.7, 5);
    std::vector<Explanation> expls;
    for (std::size_t i = 0; i < r.data.test.size(); ++i) expls.push_back(explain(r.data.test[i], r.test.predictions[i]));
    ReportBundle b;
    b.metrics = r.test.metrics;
    b.explanations = expls;
    export_report(b, dir);
    write_text_file(dir / "history.csv", history_csv(r.trained.history));
    write_text_file(dir / "edge_coeffs.csv", edge_coeffs_csv(r.data.test, r.test.predictions));
    save_checkpoint(r.trained.model.params(), dir / "checkpoint.txt");
    return r;
  };
  RunResult first = artifacts(g_out / "run_a");
  artifacts(g_out / "run_b");
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(g_out / "run_a")) {
    ++files;
    differing += read_text_file(entry.path()) != read_text_file(g_out / "run_b" / entry.path().filename());
  }

  Model restored(c, first.data.vocab.size(), load_checkpoint(g_out / "run_a" / "checkpoint.txt"));
  std::size_t bit_diffs = 0;
  for (std::size_t i = 0; i < first.data.test.size(); ++i) {
    auto p = restored.predict(first.data.test[i]);
    const auto& q = first.test.predictions[i];
    bit_diffs += std::memcmp(p.probabilities.data(), q.probabilities.data(), sizeof(double) * 2) != 0;
    bit_diffs += p.word_weights.size() != q.word_weights.size() ||
                 std::memcmp(p.word_weights.data(), q.word_weights.data(), sizeof(double) * p.word_weights.size()) != 0;
    bit_diffs += p.node_scores.size() != q.node_scores.size() ||
                 std::memcmp(p.node_scores.data(), q.node_scores.data(), sizeof(double) * p.node_scores.size()) != 0;
  }
  return {files == 5 && differing == 0 && bit_diffs == 0,
          std::to_string(differing) + "/" + std::to_string(files) + " artifact files differ between reruns; " +
              std::to_string(bit_diffs) + " prediction fields differ after checkpoint reload over " +
              std::to_string(first.data.test.size()) + " test examples"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradients},
      {"GAT dense oracle", gat_oracle},
      {"attention normalization", normalization},
      {"overfit check", overfit},
      {"multi-view superiority", multi_view},
      {"explanation fidelity", explanation_fidelity},
      {"early-detection robustness", early_detection},
      {"metrics exactness", metrics_exactness},
      {"determinism and persistence", determinism}};

  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));
    }
  }
  fs::create_directories(g_out);

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.count(k + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].first << "): " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
