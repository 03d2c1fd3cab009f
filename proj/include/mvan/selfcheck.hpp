#pragma once

#include <string>
#include <vector>

#include "mvan/pipeline.hpp"

namespace mvan {

struct SelfCheckItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Minimal full-model instance: 4-node chain graph, 5-token text, hidden
/// size 4 and 2 heads. Used by the gradient check.
struct ToyInstance {
  ModelConfig config;
  std::size_t vocab_size = 0;
  std::vector<PreparedExample> examples;
};

ToyInstance toy_instance(std::uint64_t seed);

/// Gradient check of every parameter of the full model on `toy_instance`;
/// returns the worst relative error.
double full_model_gradient_error(std::uint64_t seed, std::string* worst = nullptr);

/// Gradient check, sparse-versus-dense attention, normalization and metrics
/// checks. Every item must pass on a healthy build.
std::vector<SelfCheckItem> run_selfcheck();

}  // namespace mvan
