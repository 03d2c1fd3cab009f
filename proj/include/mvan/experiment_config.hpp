#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvan/model_config.hpp"
#include "mvan/synthetic.hpp"

namespace mvan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one CLI invocation needs. Exactly one data source: a dataset
/// directory (tweets.jsonl, retweets.jsonl, users.jsonl) or a synthetic block.
struct ExperimentConfig {
  std::optional<std::filesystem::path> dataset_dir;
  std::optional<SyntheticConfig> synthetic;
  std::uint64_t synthetic_seed = 1;
  std::optional<std::filesystem::path> embeddings;
  std::size_t max_retweets = 0;

  ModelConfig model;
  std::size_t n_runs = 10;
  std::uint64_t seed = 1;
  double train_ratio = 0.7;
  std::filesystem::path output_dir = "mvan_out";

  std::vector<double> keep_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  bool train_truncated = false;
  std::size_t top_k = 3;

  /// Throws ConfigError.
  void validate() const;
};

/// Parses an INI-style text ([section] headers, key = value lines, `;`
/// comments) and then applies `overrides`, each "section.key=value".
/// Unknown sections or keys and malformed values throw ConfigError.
ExperimentConfig parse_experiment_config(const std::string& text, const std::vector<std::string>& overrides = {});

/// Fully resolved config in the same format; parsing it back yields an
/// identical echo.
std::string config_to_ini(const ExperimentConfig& config);

/// Every key with its default and a one-line description, itself a
/// parseable config (with both data sources present, so not a valid one).
std::string config_reference();

}  // namespace mvan
