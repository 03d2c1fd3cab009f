#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mvan/autodiff.hpp"
#include "mvan/forward_context.hpp"
#include "mvan/model_config.hpp"
#include "mvan/propagation.hpp"

namespace mvan::graph {

/// Propagation graph in compressed sparse row form plus its node feature
/// matrix. Edge e belongs to node sources[e] and points at targets[e];
/// edges of node i occupy [offsets[i], offsets[i+1]).
struct GraphInput {
  Tensor features;  // N x F
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> sources;

  std::size_t node_count() const { return offsets.size() - 1; }
  std::size_t edge_count() const { return targets.size(); }

  /// Requires every node to list itself among its neighbors.
  static GraphInput from_adjacency(Tensor features, const std::vector<std::vector<std::size_t>>& adjacency);
  static GraphInput from_graph(const PropagationGraph& graph);
};

struct HeadAttention {
  ad::Var transformed;  // N x F'  (u W)
  ad::Var coeffs;       // E x 1, softmax-normalized per source node
};

/// e_ij = LeakyReLU(a^T [W u_i || W u_j]) for j in U_i only, normalized by a
/// softmax over U_i. `a` is 2F' x 1: the first F' entries score the attending
/// node, the rest score the neighbor.
HeadAttention gat_attention_coeffs(ad::Var feats, const GraphInput& g, ad::Var W, ad::Var a, double slope);

enum class GatMode { ConcatElu, AverageRelu };

struct GatHead {
  ad::Var W;
  ad::Var a;
};

struct GatLayerOutput {
  ad::Var output;
  std::vector<ad::Var> coeffs;  // one E x 1 per head, before coefficient dropout
};

/// ConcatElu: out_i = ||_h ELU(sum_j a^h_ij W^h u_j).
/// AverageRelu: out_i = ReLU(1/H sum_h sum_j a^h_ij W^h u_j).
/// Dropout from `ctx` is applied to the input features and to the
/// coefficients.
GatLayerOutput gat_layer(const ForwardContext& ctx, ad::Var feats, const GraphInput& g, std::span<const GatHead> heads,
                         GatMode mode, double slope);

ad::Var graph_readout(ad::Var nodes, Readout mode);

std::string gat_param_name(std::size_t layer, std::size_t head, std::string_view weight);

void init_params(ParameterStore& params, const GraphEncoderConfig& cfg, std::size_t in_features, bool attentive,
                 Rng& rng);

/// Output width of the encoder (V_p).
std::size_t output_dim(const GraphEncoderConfig& cfg);

struct GraphEncoding {
  ad::Var vector;                                // V_p, 1 x output_dim
  std::vector<std::vector<ad::Var>> coeffs;      // [layer][head], empty when non-attentive
};

/// Stacked GAT layers (all but the last concat+ELU, the last average+ReLU)
/// followed by the readout; with `attentive` false a single shared linear map,
/// neighbor mean and ReLU replace the attention layers.
GraphEncoding encode(const ForwardContext& ctx, const GraphEncoderConfig& cfg, const GraphInput& g, bool attentive);

/// Per-node received attention: sum over layers and heads of the incoming
/// coefficients a_ji (j != i), divided by layers * heads.
std::vector<double> received_attention(const GraphInput& g, const std::vector<std::vector<Tensor>>& coeffs);

}  // namespace mvan::graph
