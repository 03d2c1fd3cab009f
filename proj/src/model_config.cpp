#include "mvan/model_config.hpp"

#include <stdexcept>

namespace mvan {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::MVAN: return "MVAN";
    case Variant::MVAN_TSA: return "MVAN-TSA";
    case Variant::MVAN_PSA: return "MVAN-PSA";
    case Variant::TSAN: return "TSAN";
    case Variant::PSAN: return "PSAN";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "MVAN") return Variant::MVAN;
  if (s == "MVAN-TSA" || s == "MVAN_TSA") return Variant::MVAN_TSA;
  if (s == "MVAN-PSA" || s == "MVAN_PSA") return Variant::MVAN_PSA;
  if (s == "TSAN") return Variant::TSAN;
  if (s == "PSAN") return Variant::PSAN;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

bool uses_text(Variant v) { return v != Variant::PSAN; }
bool uses_graph(Variant v) { return v != Variant::TSAN; }

std::string_view readout_name(Readout r) {
  switch (r) {
    case Readout::Mean: return "mean";
    case Readout::Max: return "max";
    case Readout::FirstByOrder: return "first_by_order";
  }
  return "?";
}

Readout parse_readout(std::string_view s) {
  if (s == "mean") return Readout::Mean;
  if (s == "max") return Readout::Max;
  if (s == "first_by_order") return Readout::FirstByOrder;
  throw std::invalid_argument("unknown readout '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (uses_text(variant)) {
    if (text.embedding_dim == 0 || text.hidden_size == 0 || text.layers == 0) bad("text dimensions must be positive");
    if (text.attention_dim == 0) bad("attention_dim must be positive");
    if (text.max_len == 0) bad("max_len must be positive");
    if (text.vocab_cap < 2) bad("vocab_cap must be at least 2");
  }
  if (uses_graph(variant)) {
    if (graph.heads == 0 || graph.hidden_per_head == 0 || graph.output_dim == 0) {
      bad("graph dimensions must be positive");
    }
    if (graph.layers == 0) bad("graph layers must be at least 1");
    if (!(graph.leaky_slope >= 0.0)) bad("leaky_slope must be non-negative");
  }
  if (head_hidden == 0) bad("head_hidden must be positive");
  if (trainer.batch_size == 0) bad("batch_size must be positive");
  if (!(trainer.learning_rate >= 0.0)) bad("learning_rate must be non-negative");
  if (!(trainer.dropout >= 0.0 && trainer.dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(trainer.validation_fraction >= 0.0 && trainer.validation_fraction < 1.0)) {
    bad("validation_fraction must lie in [0, 1)");
  }
}

}  // namespace mvan
