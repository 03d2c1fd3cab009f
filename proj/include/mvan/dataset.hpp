#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mvan/propagation.hpp"
#include "mvan/rng.hpp"

namespace mvan {

/// Class indices are fixed: true news = 0, fake news = 1 (the positive class).
enum class Label : std::size_t { True = 0, Fake = 1 };

inline std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }
const char* label_name(Label l);
Label parse_label(std::string_view s);

struct SourceTweet {
  std::string id;
  std::string text;
  Label label = Label::True;
  std::optional<std::string> author_id;

  friend bool operator==(const SourceTweet&, const SourceTweet&) = default;
};

struct Example {
  SourceTweet tweet;
  PropagationGraph graph;

  friend bool operator==(const Example&, const Example&) = default;
};

/// Per-slot statistics used to z-score count features.
struct FeatureStats {
  std::array<double, kNumUserFeatures> mean{};
  std::array<double, kNumUserFeatures> stddev{};

  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

struct Dataset {
  std::vector<Example> examples;
  std::optional<FeatureStats> stats;
};

/// Population mean/std over every node of every graph in `train`, for count
/// slots. Binary slots get mean 0, std 1 (left untouched).
FeatureStats fit_feature_stats(const std::vector<Example>& train);
/// Z-scores count slots with `stats`; std 0 maps the slot to 0.
void apply_feature_stats(std::vector<Example>& examples, const FeatureStats& stats);

/// Fits statistics on `train_indices` only, applies them to every example and
/// records them in `dataset.stats`.
void normalize_features(Dataset& dataset, const std::vector<std::size_t>& train_indices);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Uniform shuffle from `rng`; the first floor(ratio * n) indices train.
Split split_dataset(std::size_t n, double ratio, Rng rng);

std::vector<Example> select(const std::vector<Example>& examples, const std::vector<std::size_t>& indices);

/// Runs impute_user_features over every graph. Returns the number of graphs
/// that needed the zero fallback.
std::size_t impute_all(std::vector<Example>& examples);

// ---------------------------------------------------------------------------
// File formats (UTF-8 JSON lines):
//   tweets.jsonl   {"id", "text", "label": "true"|"fake", "author_id"?}
//   retweets.jsonl {"tweet_id", "user_id", "order", "parent_user_id"?}
//   users.jsonl    {"user_id", "features": {<15 named fields, each nullable>}}

struct DatasetPaths {
  std::filesystem::path tweets;
  std::filesystem::path retweets;
  std::filesystem::path users;

  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadOptions {
  GraphBuilder builder;
  /// Keep at most this many earliest retweets per tweet (0 = no cap).
  std::size_t max_retweets = 0;
};

Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& options = {});
/// Writes the three files. Features of a graph node are written as they are
/// (absent slots as null); the user table is keyed by user id.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace mvan
