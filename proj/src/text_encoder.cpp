#include "mvan/text_encoder.hpp"

#include <stdexcept>

namespace mvan::text {

using ad::Var;

Var gru_step(Var xz, Var xr, Var xh, Var h_prev, const GruVars& p) {
  Var z = ad::sigmoid(ad::add(xz, ad::matmul(h_prev, p.W_z)));
  Var r = ad::sigmoid(ad::add(xr, ad::matmul(h_prev, p.W_r)));
  Var h_tilde = ad::tanh(ad::add(xh, ad::matmul(ad::mul(h_prev, r), p.W_h)));
  // (1 - z) * h + z * h~  ==  h + z * (h~ - h)
  return ad::add(h_prev, ad::mul(z, ad::sub(h_tilde, h_prev)));
}

Var gru_cell(Var x, Var h_prev, const GruVars& p) {
  if (x.cols() != p.U_z.rows() || h_prev.cols() != p.W_z.rows() || x.rows() != 1 || h_prev.rows() != 1) {
    throw NumericError("gru_cell: input " + x.value().shape_string() + " / state " + h_prev.value().shape_string() +
                       " do not match weights " + p.U_z.value().shape_string() + " / " +
                       p.W_z.value().shape_string());
  }
  return gru_step(ad::matmul(x, p.U_z), ad::matmul(x, p.U_r), ad::matmul(x, p.U_h), h_prev, p);
}

Var gru_sequence(Var x, const GruVars& p, bool reverse) {
  const std::size_t T = x.rows();
  const std::size_t hidden = p.W_z.cols();
  if (x.cols() != p.U_z.rows()) {
    throw NumericError("gru_sequence: input width " + std::to_string(x.cols()) + " does not match U_z " +
                       p.U_z.value().shape_string());
  }
  Var XZ = ad::matmul(x, p.U_z);
  Var XR = ad::matmul(x, p.U_r);
  Var XH = ad::matmul(x, p.U_h);
  Var h = x.tape().constant(Tensor::matrix(1, hidden));
  std::vector<Var> states(T);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    h = gru_step(ad::slice_rows(XZ, t, 1), ad::slice_rows(XR, t, 1), ad::slice_rows(XH, t, 1), h, p);
    states[t] = h;
  }
  return ad::concat_rows(states);
}

std::string gru_param_name(std::size_t layer, bool backward, std::string_view weight) {
  return "text_encoder.gru.l" + std::to_string(layer) + (backward ? ".bwd." : ".fwd.") + std::string(weight);
}

GruVars gru_vars(const ForwardContext& ctx, std::size_t layer, bool backward) {
  auto p = [&](std::string_view w) { return ctx.param(gru_param_name(layer, backward, w)); };
  return {p("U_z"), p("U_r"), p("U_h"), p("W_z"), p("W_r"), p("W_h")};
}

Var bigru_encode(const ForwardContext& ctx, std::span<const std::size_t> indices, std::size_t length,
                 std::size_t layers) {
  if (length == 0) throw std::invalid_argument("bigru_encode: true_length must be at least 1");
  if (length > indices.size()) throw std::invalid_argument("bigru_encode: true_length exceeds sequence length");
  Var x = ad::gather_rows(ctx.param(kEmbeddingName), indices.first(length));
  x = ctx.drop(x);
  for (std::size_t l = 0; l < layers; ++l) {
    Var fwd = gru_sequence(x, gru_vars(ctx, l, false), false);
    Var bwd = gru_sequence(x, gru_vars(ctx, l, true), true);
    const Var parts[] = {fwd, bwd};
    x = ad::concat_cols(parts);
  }
  return x;
}

Tensor bigru_encode_padded(const ForwardContext& ctx, std::span<const std::size_t> indices, std::size_t length,
                           std::size_t layers) {
  const Tensor& H = bigru_encode(ctx, indices, length, layers).value();
  Tensor out = Tensor::matrix(indices.size(), H.cols());
  std::copy(H.data().begin(), H.data().end(), out.data().begin());
  return out;
}

WordAttention word_attention(Var H, const AttentionVars& p) {
  if (H.cols() != p.W_w.rows() || p.W_w.cols() != p.u_w.rows() || p.b_w.cols() != p.W_w.cols()) {
    throw NumericError("word_attention: H " + H.value().shape_string() + " incompatible with W_w " +
                       p.W_w.value().shape_string() + ", b_w " + p.b_w.value().shape_string() + ", u_w " +
                       p.u_w.value().shape_string());
  }
  Var u = ad::tanh(ad::add_row(ad::matmul(H, p.W_w), p.b_w));
  Var scores = ad::reshape(ad::matmul(u, p.u_w), {1, H.rows()});
  Var weights = ad::softmax_rows(scores);
  return {ad::matmul(weights, H), weights};
}

std::vector<double> padded_weights(const Tensor& weights, std::size_t max_len) {
  std::vector<double> out(max_len, 0.0);
  for (std::size_t i = 0; i < weights.size() && i < max_len; ++i) out[i] = weights[i];
  return out;
}

void init_params(ParameterStore& params, const TextEncoderConfig& cfg, std::size_t vocab_size, bool with_attention,
                 Rng& rng, const EmbeddingTable* pretrained) {
  if (pretrained) {
    if (pretrained->matrix.rows() != vocab_size || pretrained->dim() != cfg.embedding_dim) {
      throw std::invalid_argument("pretrained embedding table is " + pretrained->matrix.shape_string() +
                                  ", expected " + std::to_string(vocab_size) + "x" +
                                  std::to_string(cfg.embedding_dim));
    }
    params.add(kEmbeddingName, pretrained->matrix);
  } else {
    Rng emb_rng = rng.substream("embedding");
    Tensor e = uniform_tensor({vocab_size, cfg.embedding_dim}, -0.05, 0.05, emb_rng);
    for (std::size_t k = 0; k < cfg.embedding_dim; ++k) e(kPadIndex, k) = 0.0;
    params.add(kEmbeddingName, std::move(e));
  }
  Rng gru_rng = rng.substream("gru");
  std::size_t in = cfg.embedding_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (bool backward : {false, true}) {
      for (const char* w : {"U_z", "U_r", "U_h"}) {
        params.add(gru_param_name(l, backward, w), glorot_uniform(in, cfg.hidden_size, gru_rng));
      }
      for (const char* w : {"W_z", "W_r", "W_h"}) {
        params.add(gru_param_name(l, backward, w), glorot_uniform(cfg.hidden_size, cfg.hidden_size, gru_rng));
      }
    }
    in = 2 * cfg.hidden_size;
  }
  if (with_attention) {
    Rng attn_rng = rng.substream("attention");
    params.add("text_encoder.attention.W_w", glorot_uniform(2 * cfg.hidden_size, cfg.attention_dim, attn_rng));
    params.add("text_encoder.attention.b_w", Tensor::matrix(1, cfg.attention_dim));
    params.add("text_encoder.attention.u_w", glorot_uniform(cfg.attention_dim, 1, attn_rng));
  }
}

TextEncoding encode(const ForwardContext& ctx, const TextEncoderConfig& cfg, std::span<const std::size_t> indices,
                    std::size_t length, bool with_attention) {
  Var H = ctx.drop(bigru_encode(ctx, indices, length, cfg.layers));
  if (!with_attention) return {ad::mean_rows(H), std::nullopt};
  AttentionVars p{ctx.param("text_encoder.attention.W_w"), ctx.param("text_encoder.attention.b_w"),
                  ctx.param("text_encoder.attention.u_w")};
  WordAttention a = word_attention(H, p);
  return {a.sentence, a.weights};
}

}  // namespace mvan::text
