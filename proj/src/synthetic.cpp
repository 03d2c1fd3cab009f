#include "mvan/synthetic.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace mvan {

namespace {

enum class Profile { Background, Suspicious, Authoritative };

double lognormal_count(Rng& rng, double mu, double sigma) { return std::round(std::exp(mu + sigma * rng.normal())); }

double flag(Rng& rng, double p) { return rng.bernoulli(p) ? 1.0 : 0.0; }

UserFeatures draw_user(Profile profile, Rng& rng) {
  std::array<double, kNumUserFeatures> v{};
  switch (profile) {
    case Profile::Background:
      v = {flag(rng, 0.05), flag(rng, 0.4), flag(rng, 0.1), lognormal_count(rng, 6, 1.5),
           flag(rng, 0.02), lognormal_count(rng, 6, 1.5), flag(rng, 0.1), lognormal_count(rng, 6, 1.0),
           flag(rng, 0.4), flag(rng, 0.3), lognormal_count(rng, 2, 1.5), flag(rng, 0.7),
           flag(rng, 0.02), lognormal_count(rng, 8, 1.5), flag(rng, 0.05)};
      break;
    case Profile::Suspicious:
      v = {0.0, 1.0, flag(rng, 0.8), lognormal_count(rng, 2, 0.5),
           0.0, lognormal_count(rng, 2, 0.5), 0.0, lognormal_count(rng, 7, 0.5),
           0.0, 0.0, 0.0, 0.0,
           0.0, lognormal_count(rng, 3, 0.5), 0.0};
      break;
    case Profile::Authoritative:
      v = {flag(rng, 0.5), 0.0, 0.0, lognormal_count(rng, 8, 0.5),
           0.0, lognormal_count(rng, 12, 0.5), 0.0, lognormal_count(rng, 6, 0.5),
           1.0, 1.0, lognormal_count(rng, 7, 0.5), 1.0,
           0.0, lognormal_count(rng, 10, 0.5), 1.0};
      break;
  }
  return UserFeatures::complete(v);
}

std::size_t draw_around(Rng& rng, double mean) {
  const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(mean / 2.0)));
  const auto hi = static_cast<std::size_t>(std::max(static_cast<double>(lo), std::ceil(1.5 * mean)));
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace

void SyntheticConfig::validate() const {
  auto bad = [](const std::string& m) { throw std::invalid_argument("synthetic config: " + m); };
  if (n_examples < 2) bad("n_examples must be at least 2");
  if (!(text_signal_strength >= 0.0 && text_signal_strength <= 1.0)) bad("text_signal_strength must lie in [0, 1]");
  if (!(graph_signal_strength >= 0.0 && graph_signal_strength <= 1.0)) bad("graph_signal_strength must lie in [0, 1]");
  if (vocab_size < 1) bad("vocab_size must be positive");
  if (!(mean_retweets >= 1.0)) bad("mean_retweets must be at least 1");
  if (!(mean_words >= 1.0)) bad("mean_words must be at least 1");
  if (!(planted_fraction > 0.0 && planted_fraction <= 1.0)) bad("planted_fraction must lie in (0, 1]");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) bad("missing_rate must lie in [0, 1)");
}

const std::vector<std::string>& fake_cue_tokens() {
  static const std::vector<std::string> cues = {"unverified", "allegedly", "hoax"};
  return cues;
}

const std::vector<std::string>& true_cue_tokens() {
  static const std::vector<std::string> cues = {"confirmed", "officially", "reportedly"};
  return cues;
}

SyntheticDataset gen_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const Rng root(seed);
  Rng label_rng = root.substream("labels");

  std::vector<Label> labels(config.n_examples);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2 ? Label::Fake : Label::True;
  label_rng.shuffle(labels);

  SyntheticDataset out;
  for (std::size_t i = 0; i < config.n_examples; ++i) {
    Rng rng = root.substream("example").substream(i);
    Rng text_rng = rng.substream("text");
    Rng graph_rng = rng.substream("graph");
    const Label label = labels[i];
    const bool fake = label == Label::Fake;

    SyntheticTruth truth;
    truth.tweet_id = "t" + std::to_string(i);
    truth.label = label;

    std::vector<std::string> words(draw_around(text_rng, config.mean_words));
    for (auto& w : words) w = "w" + std::to_string(text_rng.below(config.vocab_size));
    if (text_rng.bernoulli(config.text_signal_strength)) {
      const auto& cues = fake ? fake_cue_tokens() : true_cue_tokens();
      const std::string cue = cues[text_rng.below(cues.size())];
      words[text_rng.below(words.size())] = cue;
      truth.cue_token = cue;
    }
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    if (text_rng.bernoulli(0.3)) text += " http://t.co/" + std::to_string(text_rng.below(100000));

    SourceTweet tweet{truth.tweet_id, text, label, "a" + std::to_string(i)};

    const std::size_t n_users = draw_around(graph_rng, config.mean_retweets);
    const auto planted_count = static_cast<std::size_t>(
        std::max(1.0, std::ceil(config.planted_fraction * static_cast<double>(n_users) - 1e-9)));
    const bool planted = graph_rng.bernoulli(config.graph_signal_strength);

    std::vector<RetweetRecord> records;
    std::map<std::string, UserFeatures> users;
    for (std::size_t k = 0; k < n_users; ++k) {
      RetweetRecord r;
      r.tweet_id = tweet.id;
      r.user_id = "u" + std::to_string(i) + "_" + std::to_string(k);
      r.order = k;
      if (k > 0 && graph_rng.bernoulli(0.5)) {
        r.parent_user_id = "u" + std::to_string(i) + "_" + std::to_string(graph_rng.below(k));
      } else {
        r.parent_user_id = tweet.author_id;
      }
      const bool shifted = planted && k < planted_count;
      const Profile profile = shifted ? (fake ? Profile::Suspicious : Profile::Authoritative) : Profile::Background;
      UserFeatures f = draw_user(profile, graph_rng);
      const bool drop = !shifted && graph_rng.bernoulli(config.missing_rate);
      if (!drop) users.emplace(r.user_id, f);
      if (shifted) truth.shifted_users.push_back(r.user_id);
      records.push_back(std::move(r));
    }

    auto graph = build_propagation_graph(std::move(records), config.builder, &users, tweet.author_id);
    out.dataset.examples.push_back(Example{std::move(tweet), std::move(graph)});
    out.truth.push_back(std::move(truth));
  }
  return out;
}

}  // namespace mvan
