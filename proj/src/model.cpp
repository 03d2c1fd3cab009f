#include "mvan/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvan/graph_encoder.hpp"
#include "mvan/text_encoder.hpp"

namespace mvan {

Label argmax_label(const std::array<double, 2>& p) { return p[1] > p[0] ? Label::Fake : Label::True; }

double loss(const std::array<double, 2>& p, Label label) {
  const double y = label == Label::Fake ? 1.0 : 0.0;
  const double pf = std::max(p[1], 1e-12);
  const double pt = std::max(p[0], 1e-12);
  return -(y * std::log(pf) + (1.0 - y) * std::log(pt));
}

ad::Var head_logits(const ForwardContext& ctx, ad::Var features) {
  ad::Var h = ad::relu(ad::add_row(ad::matmul(features, ctx.param("head.W_tp")), ctx.param("head.b_tp")));
  h = ctx.drop(h);
  return ad::add_row(ad::matmul(h, ctx.param("head.W_out")), ctx.param("head.b_out"));
}

ad::Var predict_head(const ForwardContext& ctx, std::optional<ad::Var> text_vector,
                     std::optional<ad::Var> graph_vector) {
  std::vector<ad::Var> parts;
  if (text_vector) parts.push_back(*text_vector);
  if (graph_vector) parts.push_back(*graph_vector);
  if (parts.empty()) throw std::invalid_argument("predict_head: no input view");
  ad::Var joint = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
  return ad::softmax_rows(head_logits(ctx, joint));
}

ParameterStore build_variant(const ModelConfig& config, std::size_t vocab_size, const Rng& init,
                             const EmbeddingTable* pretrained) {
  config.validate();
  ParameterStore params;
  std::size_t joint = 0;
  if (uses_text(config.variant)) {
    if (vocab_size < 2) throw std::invalid_argument("vocabulary must contain the reserved tokens");
    Rng r = init.substream("text_encoder");
    text::init_params(params, config.text, vocab_size, config.variant != Variant::MVAN_TSA, r, pretrained);
    joint += 2 * config.text.hidden_size;
  }
  if (uses_graph(config.variant)) {
    Rng r = init.substream("graph_encoder");
    graph::init_params(params, config.graph, kNumUserFeatures, config.variant != Variant::MVAN_PSA, r);
    joint += graph::output_dim(config.graph);
  }
  Rng r = init.substream("head");
  params.add("head.W_tp", glorot_uniform(joint, config.head_hidden, r));
  params.add("head.b_tp", Tensor::matrix(1, config.head_hidden));
  params.add("head.W_out", glorot_uniform(config.head_hidden, 2, r));
  params.add("head.b_out", Tensor::matrix(1, 2));
  return params;
}

namespace {

std::set<std::string> frozen_names(const ModelConfig& config) {
  if (uses_text(config.variant) && !config.text.trainable_embeddings) return {text::kEmbeddingName};
  return {};
}

}  // namespace

Model::Model(ModelConfig config, std::size_t vocab_size, const Rng& init, const EmbeddingTable* pretrained)
    : config_(std::move(config)),
      vocab_size_(vocab_size),
      params_(build_variant(config_, vocab_size, init, pretrained)),
      frozen_(frozen_names(config_)) {}

Model::Model(ModelConfig config, std::size_t vocab_size, ParameterStore params)
    : config_(std::move(config)), vocab_size_(vocab_size), params_(std::move(params)), frozen_(frozen_names(config_)) {
  const ParameterStore expected = build_variant(config_, vocab_size_, Rng(0));
  for (const auto& [name, t] : expected) {
    if (!params_.contains(name)) {
      throw std::invalid_argument("parameters do not match variant " + std::string(variant_name(config_.variant)) +
                                  ": missing " + name);
    }
    if (!params_.at(name).same_shape(t)) {
      throw std::invalid_argument("parameter " + name + " has shape " + params_.at(name).shape_string() +
                                  ", config expects " + t.shape_string());
    }
  }
  if (params_.size() != expected.size()) {
    for (const auto& [name, _] : params_) {
      if (!expected.contains(name)) {
        throw std::invalid_argument("parameter " + name + " is not used by variant " +
                                    std::string(variant_name(config_.variant)));
      }
    }
  }
}

ForwardContext Model::context(ad::Tape& tape, bool training, Rng* rng) const {
  return ForwardContext{tape, params_, training, config_.trainer.dropout, rng, &frozen_};
}

Model::Forward Model::forward(const ForwardContext& ctx, const PreparedExample& ex) const {
  Forward f;
  std::optional<ad::Var> vt, vp;
  if (uses_text(config_.variant)) {
    auto enc = text::encode(ctx, config_.text, ex.text.indices, ex.text.length, config_.variant != Variant::MVAN_TSA);
    vt = enc.vector;
    f.word_weights = enc.weights;
  }
  if (uses_graph(config_.variant)) {
    auto enc = graph::encode(ctx, config_.graph, ex.graph, config_.variant != Variant::MVAN_PSA);
    vp = enc.vector;
    f.coeffs = std::move(enc.coeffs);
  }
  std::vector<ad::Var> parts;
  if (vt) parts.push_back(*vt);
  if (vp) parts.push_back(*vp);
  ad::Var joint = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
  f.logits = head_logits(ctx, joint);
  f.probabilities = ad::softmax_rows(f.logits);
  return f;
}

PredictionOutput Model::predict(const PreparedExample& ex) const {
  ad::Tape tape;
  ForwardContext ctx = context(tape, false, nullptr);
  Forward f = forward(ctx, ex);
  PredictionOutput out;
  const Tensor& p = f.probabilities.value();
  out.probabilities = {p[0], p[1]};
  out.predicted = argmax_label(out.probabilities);
  if (f.word_weights) out.word_weights = text::padded_weights(f.word_weights->value(), config_.text.max_len);
  if (!f.coeffs.empty()) {
    std::vector<std::vector<Tensor>> values;
    for (const auto& layer : f.coeffs) {
      values.emplace_back();
      out.edge_coeffs.emplace_back();
      for (const auto& head : layer) {
        values.back().push_back(head.value());
        out.edge_coeffs.back().push_back(head.value().data());
      }
    }
    out.node_scores = graph::received_attention(ex.graph, values);
  }
  return out;
}

std::vector<PredictionOutput> Model::predict_all(const std::vector<PreparedExample>& examples) const {
  std::vector<PredictionOutput> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict(ex));
  return out;
}

}  // namespace mvan
