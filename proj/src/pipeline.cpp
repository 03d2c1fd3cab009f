#include "mvan/pipeline.hpp"

namespace mvan {

PreparedExample prepare_example(const Example& raw, const Vocabulary& vocab, const FeatureStats& stats,
                                std::size_t max_len, double keep_fraction) {
  PropagationGraph g = keep_fraction < 1.0 ? truncate_by_deadline(raw.graph, keep_fraction) : raw.graph;
  g = impute_user_features(std::move(g)).graph;

  PreparedExample ex;
  ex.tweet_id = raw.tweet.id;
  ex.label = raw.tweet.label;
  for (const auto& n : g.nodes) {
    ex.user_ids.push_back(n.user_id);
    ex.orders.push_back(n.order);
    ex.raw_features.push_back(n.features.values);
  }

  std::vector<Example> one{Example{raw.tweet, std::move(g)}};
  apply_feature_stats(one, stats);
  ex.graph = graph::GraphInput::from_graph(one[0].graph);

  auto tokens = tokenize(raw.tweet.text);
  if (tokens.empty()) {
    // An empty text still needs one position for the recurrence.
    tokens.emplace_back(kUnknownToken);
  }
  ex.text = encode_tweet(tokens, vocab, max_len);
  tokens.resize(ex.text.length);
  ex.tokens = std::move(tokens);
  return ex;
}

std::vector<PreparedExample> prepare_split(const Dataset& raw, const std::vector<std::size_t>& indices,
                                           const Vocabulary& vocab, const FeatureStats& stats, std::size_t max_len,
                                           double keep_fraction) {
  std::vector<PreparedExample> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(prepare_example(raw.examples.at(i), vocab, stats, max_len, keep_fraction));
  return out;
}

PreparedData prepare_data(const Dataset& raw, const TextEncoderConfig& text, double train_ratio,
                          std::uint64_t split_seed, double test_keep_fraction) {
  PreparedData d;
  d.split = split_dataset(raw.examples.size(), train_ratio, Rng(split_seed).substream("split"));

  std::vector<Example> train_imputed = select(raw.examples, d.split.train);
  impute_all(train_imputed);
  d.stats = fit_feature_stats(train_imputed);

  std::vector<std::vector<std::string>> corpus;
  for (const auto& ex : train_imputed) corpus.push_back(tokenize(ex.tweet.text));
  d.vocab = build_vocab(corpus, text.vocab_cap);

  d.train = prepare_split(raw, d.split.train, d.vocab, d.stats, text.max_len, 1.0);
  d.test = prepare_split(raw, d.split.test, d.vocab, d.stats, text.max_len, test_keep_fraction);
  return d;
}

}  // namespace mvan
