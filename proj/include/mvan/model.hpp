#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mvan/autodiff.hpp"
#include "mvan/forward_context.hpp"
#include "mvan/model_config.hpp"
#include "mvan/params.hpp"
#include "mvan/pipeline.hpp"

namespace mvan {

struct PredictionOutput {
  std::array<double, 2> probabilities{};  // {true, fake}
  Label predicted = Label::True;
  /// max_len entries, zero at pad positions; empty without word attention.
  std::vector<double> word_weights;
  /// Received attention per node; empty without graph attention.
  std::vector<double> node_scores;
  /// [layer][head][edge] coefficients in GraphInput edge order.
  std::vector<std::vector<std::vector<double>>> edge_coeffs;
};

/// Argmax over {true, fake}; an exact tie resolves to true.
Label argmax_label(const std::array<double, 2>& probabilities);

/// Cross-entropy of a two-class distribution against `label` with
/// probabilities clamped at 1e-12.
double loss(const std::array<double, 2>& probabilities, Label label);

/// Hidden ReLU layer followed by a 2-way linear layer; returns logits.
ad::Var head_logits(const ForwardContext& ctx, ad::Var features);
/// softmax(head_logits([V_t || V_p])) for whichever views are present.
ad::Var predict_head(const ForwardContext& ctx, std::optional<ad::Var> text_vector, std::optional<ad::Var> graph_vector);

/// Model wiring for one variant plus its parameters.
class Model {
 public:
  /// Fresh parameters drawn from `init`.
  Model(ModelConfig config, std::size_t vocab_size, const Rng& init, const EmbeddingTable* pretrained = nullptr);
  /// Adopts `params` after checking they match the wiring of `config`.
  Model(ModelConfig config, std::size_t vocab_size, ParameterStore params);

  struct Forward {
    ad::Var logits;
    ad::Var probabilities;
    std::optional<ad::Var> word_weights;
    std::vector<std::vector<ad::Var>> coeffs;
  };

  Forward forward(const ForwardContext& ctx, const PreparedExample& ex) const;
  PredictionOutput predict(const PreparedExample& ex) const;
  std::vector<PredictionOutput> predict_all(const std::vector<PreparedExample>& examples) const;

  ForwardContext context(ad::Tape& tape, bool training = false, Rng* rng = nullptr) const;

  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const std::set<std::string>& frozen() const { return frozen_; }

 private:
  ModelConfig config_;
  std::size_t vocab_size_;
  ParameterStore params_;
  std::set<std::string> frozen_;
};

/// Builds the parameter set of `config` (the wiring of its variant).
ParameterStore build_variant(const ModelConfig& config, std::size_t vocab_size, const Rng& init,
                             const EmbeddingTable* pretrained = nullptr);

}  // namespace mvan
