#pragma once

#include <span>
#include <string>
#include <vector>

#include "mvan/autodiff.hpp"
#include "mvan/forward_context.hpp"
#include "mvan/model_config.hpp"
#include "mvan/params.hpp"
#include "mvan/text_data.hpp"

namespace mvan::text {

/// Gate weights of one GRU direction. Inputs multiply from the left
/// (x U, h W), no biases.
struct GruVars {
  ad::Var U_z, U_r, U_h;
  ad::Var W_z, W_r, W_h;
};

/// z = sigmoid(x U_z + h W_z); r = sigmoid(x U_r + h W_r);
/// h~ = tanh(x U_h + (h * r) W_h); h' = (1 - z) * h + z * h~.
ad::Var gru_cell(ad::Var x, ad::Var h_prev, const GruVars& p);

/// Same recurrence with the input projections x U_* already computed.
ad::Var gru_step(ad::Var xz, ad::Var xr, ad::Var xh, ad::Var h_prev, const GruVars& p);

/// Runs one direction over the rows of `x` (T x in), returning T x hidden
/// with row t holding the state after consuming row t. Reverse direction
/// walks from the last row to the first but still returns rows in position
/// order.
ad::Var gru_sequence(ad::Var x, const GruVars& p, bool reverse);

std::string gru_param_name(std::size_t layer, bool backward, std::string_view weight);
GruVars gru_vars(const ForwardContext& ctx, std::size_t layer, bool backward);

/// Stacked BiGRU over the first `length` tokens. Returns length x 2*hidden;
/// pad positions never enter the recurrence.
ad::Var bigru_encode(const ForwardContext& ctx, std::span<const std::size_t> indices, std::size_t length,
                     std::size_t layers);

/// bigru_encode padded back to max_len rows with zero rows at pad positions.
Tensor bigru_encode_padded(const ForwardContext& ctx, std::span<const std::size_t> indices, std::size_t length,
                           std::size_t layers);

struct AttentionVars {
  ad::Var W_w;  // 2*hidden x n
  ad::Var b_w;  // 1 x n
  ad::Var u_w;  // n x 1
};

struct WordAttention {
  ad::Var sentence;  // 1 x 2*hidden
  ad::Var weights;   // 1 x length, one weight per real token
};

/// u_t = tanh(W_w h_t + b_w); a = softmax_t(u_t . u_w); S = sum_t a_t h_t.
/// `H` holds only the real (non-pad) rows.
WordAttention word_attention(ad::Var H, const AttentionVars& p);

/// Expands per-token weights to max_len with exact zeros at pad positions.
std::vector<double> padded_weights(const Tensor& weights, std::size_t max_len);

/// Adds text_encoder.* parameters. `pretrained` supplies the embedding matrix
/// when given (its row count must equal vocab_size).
void init_params(ParameterStore& params, const TextEncoderConfig& cfg, std::size_t vocab_size, bool with_attention,
                 Rng& rng, const EmbeddingTable* pretrained = nullptr);

inline constexpr const char* kEmbeddingName = "text_encoder.embedding";

struct TextEncoding {
  ad::Var vector;                 // V_t, 1 x 2*hidden
  std::optional<ad::Var> weights;  // 1 x length when attention is used
};

/// Embedding lookup, dropout, BiGRU, dropout, then word attention (or the
/// mean of BiGRU rows when `with_attention` is false).
TextEncoding encode(const ForwardContext& ctx, const TextEncoderConfig& cfg, std::span<const std::size_t> indices,
                    std::size_t length, bool with_attention);

}  // namespace mvan::text
