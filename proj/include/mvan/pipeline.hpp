#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mvan/dataset.hpp"
#include "mvan/graph_encoder.hpp"
#include "mvan/model_config.hpp"
#include "mvan/text_data.hpp"

namespace mvan {

/// One example in model-ready form.
struct PreparedExample {
  std::string tweet_id;
  Label label = Label::True;
  std::vector<std::string> tokens;  // first `text.length` tokens
  EncodedText text;
  graph::GraphInput graph;  // imputed, normalized features
  std::vector<std::string> user_ids;
  std::vector<std::uint64_t> orders;
  std::vector<std::array<double, kNumUserFeatures>> raw_features;  // imputed, not normalized
};

/// Truncates (keep_fraction < 1), imputes, normalizes and encodes one raw
/// example. Truncation happens before imputation so users past the deadline
/// never contribute.
PreparedExample prepare_example(const Example& raw, const Vocabulary& vocab, const FeatureStats& stats,
                                std::size_t max_len, double keep_fraction = 1.0);

struct PreparedData {
  Vocabulary vocab;
  FeatureStats stats;
  Split split;
  std::vector<PreparedExample> train;
  std::vector<PreparedExample> test;
};

/// Splits `raw`, builds the vocabulary and feature statistics from the
/// training split only, and prepares both splits. Test graphs are truncated
/// to `test_keep_fraction`.
PreparedData prepare_data(const Dataset& raw, const TextEncoderConfig& text, double train_ratio, std::uint64_t split_seed,
                          double test_keep_fraction = 1.0);

/// Prepares the examples at `indices` with the given vocabulary and stats.
std::vector<PreparedExample> prepare_split(const Dataset& raw, const std::vector<std::size_t>& indices,
                                           const Vocabulary& vocab, const FeatureStats& stats, std::size_t max_len,
                                           double keep_fraction);

}  // namespace mvan
