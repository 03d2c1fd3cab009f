#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvan/dataset.hpp"

namespace mvan {

/// Planted-signal generator for desk-scale experiments.
///
/// Each example gets a random text over neutral words and a retweet cascade of
/// users with background profiles. With probability text_signal_strength a
/// class cue word is inserted into the text (fake cues for fake tweets, true
/// cues for true tweets). With probability graph_signal_strength the earliest
/// planted_fraction of retweeters get a class-specific profile: unverified,
/// default-profile accounts with few followers for fake tweets, verified
/// accounts with large audiences for true tweets.
struct SyntheticConfig {
  std::size_t n_examples = 400;
  double text_signal_strength = 0.9;
  double graph_signal_strength = 0.9;
  std::size_t vocab_size = 200;
  double mean_retweets = 20.0;
  double mean_words = 12.0;
  double planted_fraction = 0.1;
  double missing_rate = 0.03;
  GraphBuilder builder = GraphBuilder::chain(1);

  void validate() const;
};

struct SyntheticTruth {
  std::string tweet_id;
  Label label = Label::True;
  std::optional<std::string> cue_token;
  std::vector<std::string> shifted_users;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<SyntheticTruth> truth;  // parallel to dataset.examples
};

const std::vector<std::string>& fake_cue_tokens();
const std::vector<std::string>& true_cue_tokens();

SyntheticDataset gen_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace mvan
