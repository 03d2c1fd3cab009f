#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mvan/gradcheck.hpp"
#include "mvan/graph_encoder.hpp"
#include "gat_fixtures.hpp"

using namespace mvan;
using ad::Tape;
using ad::Var;

namespace {

using namespace gat_fixtures;

GraphEncoderConfig small_config() {
  GraphEncoderConfig cfg;
  cfg.heads = 2;
  cfg.hidden_per_head = 3;
  cfg.output_dim = 2;
  cfg.layers = 2;
  return cfg;
}

}  // namespace

TEST_CASE("coefficient examples") {
  Tape tape;
  SUBCASE("isolated node") {
    auto g = graph::GraphInput::from_adjacency(Tensor::matrix(1, 2, 0.7), {{0}});
    auto att = graph::gat_attention_coeffs(tape.constant(g.features), g, tape.constant(Tensor::matrix(2, 2, 0.5)),
                                           tape.constant(Tensor::matrix(4, 1, 1.0)), 0.3);
    CHECK(att.coeffs.value()[0] == 1.0);
  }
  SUBCASE("zero attention vector gives uniform coefficients") {
    Rng rng(1);
    auto g = graph::GraphInput::from_adjacency(uniform_tensor({3, 2}, -1, 1, rng), chain(3));
    auto att = graph::gat_attention_coeffs(tape.constant(g.features), g, tape.constant(uniform_tensor({2, 2}, -1, 1, rng)),
                                           tape.constant(Tensor::matrix(4, 1)), 0.3);
    // Node 1 has neighbors {0, 1, 2}.
    for (std::size_t e = g.offsets[1]; e < g.offsets[2]; ++e)
      CHECK(att.coeffs.value()[e] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("logits 0 and ln 2") {
    auto g = graph::GraphInput::from_adjacency(Tensor::from_rows({{0.0}, {std::log(2.0)}}), {{0, 1}, {0, 1}});
    auto att = graph::gat_attention_coeffs(tape.constant(g.features), g, tape.constant(Tensor::scalar(1.0)),
                                           tape.constant(Tensor::from_rows({{0.0}, {1.0}})), 0.3);
    CHECK(att.coeffs.value()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(att.coeffs.value()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("missing self-loop is rejected") {
  CHECK_THROWS_AS(graph::GraphInput::from_adjacency(Tensor::matrix(2, 1), {{0, 1}, {0}}), GraphError);
  CHECK_THROWS_AS(graph::GraphInput::from_adjacency(Tensor::matrix(2, 1), {{0, 2}, {1}}), GraphError);
}

TEST_CASE("sparse layers equal the dense oracle") {
  Rng rng(17);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (const Adj& adj : {chain(n), star(n), complete(n)}) {
      for (auto mode : {graph::GatMode::ConcatElu, graph::GatMode::AverageRelu}) {
        Tensor x = uniform_tensor({n, 3}, -2, 2, rng);
        Layer l = random_layer(2, 3, 4, rng);
        auto g = graph::GraphInput::from_adjacency(x, adj);
        Tape tape;
        auto out = sparse_layer(tape, tape.constant(x), g, l, mode, 0.3);
        CHECK(max_diff(out.output.value(), dense_layer(to_rows(x), adj, l, mode, 0.3)) < 1e-10);
        for (std::size_t k = 0; k < 2; ++k) {
          auto d = oracle::dense_gat_head(to_rows(x), mask_of(adj), to_rows(l.W[k]), l.a[k].data(), 0.3);
          for (std::size_t e = 0; e < g.edge_count(); ++e)
            CHECK(std::abs(out.coeffs[k].value()[e] - d.alpha[g.sources[e]][g.targets[e]]) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("layer edge cases") {
  Rng rng(2);
  Tensor x = uniform_tensor({3, 3}, -1, 1, rng);
  auto g = graph::GraphInput::from_adjacency(x, chain(3));
  SUBCASE("single head concat is the head itself") {
    Layer l = random_layer(1, 3, 2, rng);
    Tape tape;
    auto out = sparse_layer(tape, tape.constant(x), g, l, graph::GatMode::ConcatElu, 0.3);
    CHECK(out.output.cols() == 2);
    CHECK(max_diff(out.output.value(), dense_layer(to_rows(x), chain(3), l, graph::GatMode::ConcatElu, 0.3)) < 1e-12);
  }
  SUBCASE("zero weights give zero output") {
    Layer l = random_layer(2, 3, 2, rng);
    for (auto& w : l.W) w = Tensor::matrix(3, 2);
    Tape tape;
    auto out = sparse_layer(tape, tape.constant(x), g, l, graph::GatMode::ConcatElu, 0.3);
    for (double v : out.output.value().data()) CHECK(v == 0.0);
  }
  SUBCASE("negative pre-activations are cut by ReLU") {
    Layer l = random_layer(2, 3, 2, rng);
    Tensor pos = Tensor::matrix(3, 3, 1.0);
    for (auto& w : l.W) w = Tensor::matrix(3, 2, -1.0);
    auto gp = graph::GraphInput::from_adjacency(pos, chain(3));
    Tape tape;
    auto out = sparse_layer(tape, tape.constant(pos), gp, l, graph::GatMode::AverageRelu, 0.3);
    for (double v : out.output.value().data()) CHECK(v == 0.0);
  }
}

TEST_CASE("graph_readout") {
  Tape tape;
  Var one = tape.constant(Tensor::row({3, -1}));
  CHECK(graph::graph_readout(one, Readout::Mean).value() == Tensor::row({3, -1}));
  Var two = tape.constant(Tensor::from_rows({{0, 2}, {2, 0}}));
  CHECK(graph::graph_readout(two, Readout::Mean).value() == Tensor::row({1, 1}));
  CHECK(graph::graph_readout(two, Readout::Max).value() == Tensor::row({2, 2}));
  CHECK(graph::graph_readout(two, Readout::FirstByOrder).value() == Tensor::row({0, 2}));
}

TEST_CASE("coefficients are normalized per node, layer and head") {
  GraphEncoderConfig cfg = small_config();
  ParameterStore p;
  Rng rng(5);
  graph::init_params(p, cfg, 4, true, rng);
  for (std::size_t n = 1; n <= 7; ++n) {
    auto g = graph::GraphInput::from_adjacency(uniform_tensor({n, 4}, -2, 2, rng), n % 2 ? chain(n) : star(n));
    Tape tape;
    ForwardContext ctx{tape, p};
    auto enc = graph::encode(ctx, cfg, g, true);
    REQUIRE(enc.coeffs.size() == 2);
    for (const auto& layer : enc.coeffs) {
      REQUIRE(layer.size() == 2);
      for (const auto& c : layer) {
        for (std::size_t i = 0; i < n; ++i) {
          double total = 0;
          for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
            CHECK(c.value()[e] >= 0.0);
            total += c.value()[e];
          }
          CHECK(std::abs(total - 1.0) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("relabeling nodes permutes outputs and keeps the mean readout") {
  GraphEncoderConfig cfg = small_config();
  ParameterStore p;
  Rng rng(6);
  graph::init_params(p, cfg, 4, true, rng);
  const std::size_t n = 5;
  Adj adj{{0, 1, 3}, {0, 1, 2}, {1, 2}, {0, 3, 4}, {3, 4}};
  Tensor x = uniform_tensor({n, 4}, -2, 2, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};  // new index of old node i
  Adj padj(n);
  Tensor px = Tensor::matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : adj[i]) padj[perm[i]].push_back(perm[j]);
    std::sort(padj[perm[i]].begin(), padj[perm[i]].end());
    for (std::size_t c = 0; c < 4; ++c) px(perm[i], c) = x(i, c);
  }
  auto g = graph::GraphInput::from_adjacency(x, adj), pg = graph::GraphInput::from_adjacency(px, padj);
  Tape t1, t2;
  ForwardContext c1{t1, p}, c2{t2, p};
  auto a = graph::encode(c1, cfg, g, true), b = graph::encode(c2, cfg, pg, true);
  for (std::size_t c = 0; c < a.vector.cols(); ++c) CHECK(std::abs(a.vector.value()[c] - b.vector.value()[c]) < 1e-10);

  std::vector<std::vector<Tensor>> ca, cb;
  for (auto& l : a.coeffs) ca.push_back({l[0].value(), l[1].value()});
  for (auto& l : b.coeffs) cb.push_back({l[0].value(), l[1].value()});
  auto sa = graph::received_attention(g, ca), sb = graph::received_attention(pg, cb);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(sa[i] - sb[perm[i]]) < 1e-10);
}

TEST_CASE("graph encoder gradients match finite differences") {
  GraphEncoderConfig cfg;
  cfg.heads = 2;
  cfg.hidden_per_head = 2;
  cfg.output_dim = 2;
  ParameterStore p;
  Rng rng(8);
  graph::init_params(p, cfg, 3, true, rng);
  auto g = graph::GraphInput::from_adjacency(uniform_tensor({4, 3}, -2, 2, rng), chain(4));
  Tensor w = uniform_tensor({1, 2}, 0.5, 1.5, rng);
  auto r = check_gradients(p, [&](Tape& tape, const ParameterStore& ps) {
    ForwardContext ctx{tape, ps};
    return ad::sum(ad::mul_const(graph::encode(ctx, cfg, g, true).vector, w));
  });
  INFO(r.worst << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.checked == 2 * (3 * 2 + 4) + 2 * (4 * 2 + 4));
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("received attention sums incoming coefficients") {
  // Two heads on a 3-node chain with hand-set coefficients.
  auto g = graph::GraphInput::from_adjacency(Tensor::matrix(3, 1), chain(3));
  // Edge order: (0,0) (0,1) | (1,0) (1,1) (1,2) | (2,1) (2,2)
  Tensor h1 = Tensor({7, 1}, std::vector<double>{0.6, 0.4, 0.2, 0.5, 0.3, 0.9, 0.1});
  Tensor h2 = Tensor({7, 1}, std::vector<double>{0.5, 0.5, 0.1, 0.1, 0.8, 0.3, 0.7});
  auto s = graph::received_attention(g, {{h1, h2}});
  CHECK(s[0] == doctest::Approx((0.2 + 0.1) / 2));
  CHECK(s[1] == doctest::Approx((0.4 + 0.9 + 0.5 + 0.3) / 2));
  CHECK(s[2] == doctest::Approx((0.3 + 0.8) / 2));
}

TEST_CASE("non-attentive aggregator is a neighbor mean") {
  GraphEncoderConfig cfg = small_config();
  ParameterStore p;
  Rng rng(9);
  graph::init_params(p, cfg, 2, false, rng);
  Tensor x = uniform_tensor({3, 2}, -2, 2, rng);
  auto g = graph::GraphInput::from_adjacency(x, chain(3));
  Tape tape;
  ForwardContext ctx{tape, p};
  auto enc = graph::encode(ctx, cfg, g, false);
  CHECK(enc.coeffs.empty());
  const Tensor& W = p.at("graph_encoder.aggregator.W");
  const Tensor& b = p.at("graph_encoder.aggregator.b");
  const Adj adj = chain(3);
  std::vector<double> mean(cfg.output_dim, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t o = 0; o < cfg.output_dim; ++o) {
      double s = 0;
      for (auto j : adj[i])
        for (std::size_t k = 0; k < 2; ++k) s += x(j, k) * W(k, o);
      mean[o] += std::max(0.0, s / static_cast<double>(adj[i].size()) + b[o]) / 3.0;
    }
  }
  for (std::size_t o = 0; o < cfg.output_dim; ++o) CHECK(enc.vector.value()[o] == doctest::Approx(mean[o]).epsilon(1e-13));
}
