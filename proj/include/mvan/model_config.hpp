#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "mvan/propagation.hpp"

namespace mvan {

/// Full model and its four ablations.
///   MVAN      text attention + graph attention
///   MVAN_TSA  text view pools BiGRU rows by mean instead of word attention
///   MVAN_PSA  graph view uses a non-attentive neighbor-mean aggregator
///   TSAN      text view only
///   PSAN      graph view only
enum class Variant { MVAN, MVAN_TSA, MVAN_PSA, TSAN, PSAN };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);
bool uses_text(Variant v);
bool uses_graph(Variant v);

enum class Readout { Mean, Max, FirstByOrder };
std::string_view readout_name(Readout r);
Readout parse_readout(std::string_view s);

struct TextEncoderConfig {
  std::size_t embedding_dim = 300;
  std::size_t hidden_size = 300;
  std::size_t layers = 2;
  std::size_t attention_dim = 128;
  std::size_t max_len = 30;
  std::size_t vocab_cap = 250000;
  bool trainable_embeddings = true;
};

struct GraphEncoderConfig {
  std::size_t heads = 5;
  std::size_t hidden_per_head = 32;  // layer-1 output per head (concatenated)
  std::size_t output_dim = 64;       // last layer output (averaged over heads)
  std::size_t layers = 2;
  double leaky_slope = 0.3;
  Readout readout = Readout::Mean;
  GraphBuilder builder = GraphBuilder::chain(1);
};

struct TrainerConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double dropout = 0.5;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  /// Share of the training split held out for early stopping (0 disables).
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct ModelConfig {
  Variant variant = Variant::MVAN;
  TextEncoderConfig text;
  GraphEncoderConfig graph;
  std::size_t head_hidden = 64;
  TrainerConfig trainer;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

}  // namespace mvan
