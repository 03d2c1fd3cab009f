#include "mvan/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mvan/evaluation.hpp"
#include "mvan/gradcheck.hpp"
#include "mvan/model.hpp"

namespace mvan {

namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;

Adjacency chain_adjacency(std::size_t n) {
  Adjacency adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) adj[i].push_back(i - 1);
    adj[i].push_back(i);
    if (i + 1 < n) adj[i].push_back(i + 1);
  }
  return adj;
}

Adjacency star_adjacency(std::size_t n) {
  Adjacency adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    adj[i].push_back(i);
    if (i > 0) {
      adj[i].push_back(0);
      adj[0].push_back(i);
    }
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

Adjacency complete_adjacency(std::size_t n) {
  Adjacency adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) adj[i].push_back(j);
  return adj;
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Dense reference: full N x N score matrix, masked entries excluded from the
// row softmax.
double dense_coeff_diff(const Tensor& x, const Adjacency& adj, const Tensor& W, const Tensor& a, double slope,
                        const Tensor& sparse_coeffs, const graph::GraphInput& g) {
  const std::size_t n = x.rows(), f = W.cols();
  std::vector<std::vector<double>> wh(n, std::vector<double>(f, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < f; ++k)
      for (std::size_t m = 0; m < x.cols(); ++m) wh[i][k] += x(i, m) * W(m, k);
  std::vector<std::vector<double>> alpha(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> mask(n, false);
    for (std::size_t j : adj[i]) mask[j] = true;
    double mx = -INFINITY;
    std::vector<double> s(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      double e = 0;
      for (std::size_t k = 0; k < f; ++k) e += a[k] * wh[i][k] + a[f + k] * wh[j][k];
      s[j] = e > 0 ? e : slope * e;
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) z += std::exp(s[j] - mx);
    for (std::size_t j = 0; j < n; ++j)
      if (mask[j]) alpha[i][j] = std::exp(s[j] - mx) / z;
  }
  double worst = 0;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    worst = std::max(worst, std::abs(sparse_coeffs[e] - alpha[g.sources[e]][g.targets[e]]));
  }
  return worst;
}

SelfCheckItem gradient_item() {
  std::string worst;
  const double err = full_model_gradient_error(1, &worst);
  std::ostringstream os;
  os << "max relative error " << err << " at " << worst;
  return {"gradients", err < 1e-4, os.str()};
}

SelfCheckItem dense_attention_item() {
  Rng rng(7);
  double worst = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const Adjacency& adj : {chain_adjacency(n), star_adjacency(n), complete_adjacency(n)}) {
      Tensor x = random_matrix(n, 3, rng);
      Tensor W = random_matrix(3, 4, rng);
      Tensor a = random_matrix(8, 1, rng);
      auto g = graph::GraphInput::from_adjacency(x, adj);
      ad::Tape tape;
      auto h = graph::gat_attention_coeffs(tape.constant(x), g, tape.constant(W), tape.constant(a), 0.3);
      worst = std::max(worst, dense_coeff_diff(x, adj, W, a, 0.3, h.coeffs.value(), g));
    }
  }
  std::ostringstream os;
  os << "max abs difference " << worst;
  return {"sparse attention vs dense", worst < 1e-10, os.str()};
}

SelfCheckItem normalization_item() {
  ToyInstance toy = toy_instance(3);
  Model m(toy.config, toy.vocab_size, Rng(5));
  double worst = 0;
  for (const auto& ex : toy.examples) {
    PredictionOutput p = m.predict(ex);
    double s = 0;
    for (double w : p.word_weights) s += w;
    worst = std::max(worst, std::abs(s - 1.0));
    for (const auto& layer : p.edge_coeffs) {
      for (const auto& head : layer) {
        for (std::size_t i = 0; i < ex.graph.node_count(); ++i) {
          double z = 0;
          for (std::size_t e = ex.graph.offsets[i]; e < ex.graph.offsets[i + 1]; ++e) z += head[e];
          worst = std::max(worst, std::abs(z - 1.0));
        }
      }
    }
    worst = std::max(worst, std::abs(p.probabilities[0] + p.probabilities[1] - 1.0));
  }
  std::ostringstream os;
  os << "max deviation from 1: " << worst;
  return {"attention normalization", worst < 1e-6, os.str()};
}

SelfCheckItem metrics_item() {
  Rng rng(11);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    std::size_t n = 1 + rng.below(1000);
    std::vector<Label> p(n), l(n);
    std::uint64_t correct = 0, tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(0.5) ? Label::Fake : Label::True;
      l[i] = rng.bernoulli(0.5) ? Label::Fake : Label::True;
      correct += p[i] == l[i];
      tp += p[i] == Label::Fake && l[i] == Label::Fake;
    }
    auto m = metrics(confusion(p, l));
    ok = m.accuracy == static_cast<double>(correct) / static_cast<double>(n) && m.counts.tp == tp;
  }
  std::vector<MetricsReport> same(10, metrics({3, 4, 1, 2}));
  auto agg = aggregate_runs(same);
  ok = ok && agg.accuracy.stddev == 0.0 && agg.f1.stddev == 0.0;
  return {"metrics", ok, ok ? "counts and aggregates exact" : "mismatch"};
}

}  // namespace

ToyInstance toy_instance(std::uint64_t seed) {
  ToyInstance t;
  ModelConfig& c = t.config;
  c.text.embedding_dim = 4;
  c.text.hidden_size = 4;
  c.text.layers = 1;
  c.text.attention_dim = 4;
  c.text.max_len = 5;
  c.graph.heads = 2;
  c.graph.hidden_per_head = 4;
  c.graph.output_dim = 4;
  c.head_hidden = 4;
  c.trainer.dropout = 0.0;
  t.vocab_size = 10;
  Rng rng = Rng(seed).substream("toy");
  for (std::size_t k = 0; k < 2; ++k) {
    PreparedExample ex;
    ex.tweet_id = "toy" + std::to_string(k);
    ex.label = k == 0 ? Label::Fake : Label::True;
    for (std::size_t i = 0; i < 5; ++i) {
      ex.text.indices.push_back(1 + rng.below(t.vocab_size - 1));
      ex.tokens.push_back("t" + std::to_string(ex.text.indices.back()));
    }
    ex.text.length = 5;
    ex.graph = graph::GraphInput::from_adjacency(random_matrix(4, kNumUserFeatures, rng), chain_adjacency(4));
    for (std::size_t i = 0; i < 4; ++i) {
      ex.user_ids.push_back("u" + std::to_string(i));
      ex.orders.push_back(i);
      ex.raw_features.push_back({});
    }
    t.examples.push_back(std::move(ex));
  }
  return t;
}

double full_model_gradient_error(std::uint64_t seed, std::string* worst) {
  ToyInstance toy = toy_instance(seed);
  Model m(toy.config, toy.vocab_size, Rng(seed));
  auto r = check_gradients(m.params(), [&](ad::Tape& tape, const ParameterStore& ps) {
    ForwardContext ctx{tape, ps};
    std::vector<ad::Var> losses;
    for (const auto& ex : toy.examples) {
      losses.push_back(ad::cross_entropy(m.forward(ctx, ex).logits, label_index(ex.label)));
    }
    return ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / static_cast<double>(losses.size()));
  });
  if (worst) *worst = r.worst;
  return r.max_rel_error;
}

std::vector<SelfCheckItem> run_selfcheck() {
  return {gradient_item(), dense_attention_item(), normalization_item(), metrics_item()};
}

}  // namespace mvan
