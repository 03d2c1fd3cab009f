#include "mvan/graph_encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace mvan::graph {

using ad::Var;

GraphInput GraphInput::from_adjacency(Tensor features, const std::vector<std::vector<std::size_t>>& adjacency) {
  const std::size_t n = adjacency.size();
  if (n == 0) throw GraphError("graph has no nodes");
  if (features.rows() != n) {
    throw GraphError("feature matrix has " + std::to_string(features.rows()) + " rows for " + std::to_string(n) +
                     " nodes");
  }
  GraphInput g;
  g.features = std::move(features);
  g.offsets.reserve(n + 1);
  g.offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    bool self = false;
    for (std::size_t j : adjacency[i]) {
      if (j >= n) throw GraphError("adjacency of node " + std::to_string(i) + " references node " + std::to_string(j));
      self = self || j == i;
      g.targets.push_back(j);
      g.sources.push_back(i);
    }
    if (!self) throw GraphError("node " + std::to_string(i) + " has no self-loop");
    g.offsets.push_back(g.targets.size());
  }
  return g;
}

GraphInput GraphInput::from_graph(const PropagationGraph& graph) {
  Tensor feats = Tensor::matrix(graph.size(), kNumUserFeatures);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& f = graph.nodes[i].features;
    for (std::size_t s = 0; s < kNumUserFeatures; ++s) feats(i, s) = f.present[s] ? f.values[s] : 0.0;
  }
  return from_adjacency(std::move(feats), graph.adjacency);
}

HeadAttention gat_attention_coeffs(Var feats, const GraphInput& g, Var W, Var a, double slope) {
  if (feats.rows() != g.node_count() || feats.cols() != W.rows() || a.rows() != 2 * W.cols() || a.cols() != 1) {
    throw NumericError("gat_attention_coeffs: features " + feats.value().shape_string() + ", W " +
                       W.value().shape_string() + ", a " + a.value().shape_string() + " are inconsistent");
  }
  const std::size_t fout = W.cols();
  Var Wh = ad::matmul(feats, W);
  Var self_score = ad::matmul(Wh, ad::slice_rows(a, 0, fout));
  Var neigh_score = ad::matmul(Wh, ad::slice_rows(a, fout, fout));
  Var logits = ad::add(ad::gather_rows(self_score, g.sources), ad::gather_rows(neigh_score, g.targets));
  logits = ad::leaky_relu(logits, slope);
  return {Wh, ad::segment_softmax(logits, g.offsets)};
}

GatLayerOutput gat_layer(const ForwardContext& ctx, Var feats, const GraphInput& g, std::span<const GatHead> heads,
                         GatMode mode, double slope) {
  if (heads.empty()) throw std::invalid_argument("gat_layer: at least one head is required");
  Var x = ctx.drop(feats);
  GatLayerOutput out;
  std::vector<Var> per_head;
  for (const GatHead& h : heads) {
    HeadAttention att = gat_attention_coeffs(x, g, h.W, h.a, slope);
    out.coeffs.push_back(att.coeffs);
    Var agg = ad::segment_weighted_sum(ctx.drop(att.coeffs), att.transformed, g.offsets, g.targets);
    per_head.push_back(mode == GatMode::ConcatElu ? ad::elu(agg) : agg);
  }
  if (mode == GatMode::ConcatElu) {
    out.output = per_head.size() == 1 ? per_head[0] : ad::concat_cols(per_head);
  } else {
    Var total = per_head[0];
    for (std::size_t k = 1; k < per_head.size(); ++k) total = ad::add(total, per_head[k]);
    out.output = ad::relu(ad::scale(total, 1.0 / static_cast<double>(per_head.size())));
  }
  return out;
}

Var graph_readout(Var nodes, Readout mode) {
  switch (mode) {
    case Readout::Mean: return ad::mean_rows(nodes);
    case Readout::Max: return ad::max_rows(nodes);
    case Readout::FirstByOrder: return ad::slice_rows(nodes, 0, 1);
  }
  throw std::invalid_argument("graph_readout: unknown mode");
}

std::string gat_param_name(std::size_t layer, std::size_t head, std::string_view weight) {
  return "graph_encoder.gat.l" + std::to_string(layer) + ".h" + std::to_string(head) + "." + std::string(weight);
}

std::size_t output_dim(const GraphEncoderConfig& cfg) { return cfg.output_dim; }

void init_params(ParameterStore& params, const GraphEncoderConfig& cfg, std::size_t in_features, bool attentive,
                 Rng& rng) {
  if (!attentive) {
    Rng r = rng.substream("aggregator");
    params.add("graph_encoder.aggregator.W", glorot_uniform(in_features, cfg.output_dim, r));
    params.add("graph_encoder.aggregator.b", Tensor::matrix(1, cfg.output_dim));
    return;
  }
  Rng r = rng.substream("gat");
  std::size_t in = in_features;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const bool last = l + 1 == cfg.layers;
    const std::size_t out = last ? cfg.output_dim : cfg.hidden_per_head;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      params.add(gat_param_name(l, h, "W"), glorot_uniform(in, out, r));
      params.add(gat_param_name(l, h, "a"), glorot_uniform(2 * out, 1, r));
    }
    in = out * cfg.heads;
  }
}

GraphEncoding encode(const ForwardContext& ctx, const GraphEncoderConfig& cfg, const GraphInput& g, bool attentive) {
  Var x = ctx.tape.constant_view(g.features);
  GraphEncoding enc;
  if (!attentive) {
    // Fixed uniform coefficients 1/|U_i| over each neighbor list.
    Tensor w = Tensor::matrix(g.edge_count(), 1);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const double inv = 1.0 / static_cast<double>(g.offsets[i + 1] - g.offsets[i]);
      for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) w[e] = inv;
    }
    Var h = ad::matmul(ctx.drop(x), ctx.param("graph_encoder.aggregator.W"));
    Var agg = ad::segment_weighted_sum(ctx.tape.constant(std::move(w)), h, g.offsets, g.targets);
    Var nodes = ad::relu(ad::add_row(agg, ctx.param("graph_encoder.aggregator.b")));
    enc.vector = graph_readout(nodes, cfg.readout);
    return enc;
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const bool last = l + 1 == cfg.layers;
    std::vector<GatHead> heads;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      heads.push_back({ctx.param(gat_param_name(l, h, "W")), ctx.param(gat_param_name(l, h, "a"))});
    }
    GatLayerOutput out =
        gat_layer(ctx, x, g, heads, last ? GatMode::AverageRelu : GatMode::ConcatElu, cfg.leaky_slope);
    enc.coeffs.push_back(std::move(out.coeffs));
    x = out.output;
  }
  enc.vector = graph_readout(x, cfg.readout);
  return enc;
}

std::vector<double> received_attention(const GraphInput& g, const std::vector<std::vector<Tensor>>& coeffs) {
  std::vector<double> score(g.node_count(), 0.0);
  std::size_t sets = 0;
  for (const auto& layer : coeffs) {
    for (const Tensor& c : layer) {
      ++sets;
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        if (g.sources[e] != g.targets[e]) score[g.targets[e]] += c[e];
      }
    }
  }
  if (sets > 0) {
    for (double& s : score) s /= static_cast<double>(sets);
  }
  return score;
}

}  // namespace mvan::graph
