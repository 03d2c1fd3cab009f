#include "mvan/dataset.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "mvan/log.hpp"

namespace mvan {

using nlohmann::json;

const char* label_name(Label l) { return l == Label::Fake ? "fake" : "true"; }

Label parse_label(std::string_view s) {
  if (s == "true") return Label::True;
  if (s == "fake") return Label::Fake;
  throw DataFormatError("label must be \"true\" or \"fake\", got \"" + std::string(s) + "\"");
}

FeatureStats fit_feature_stats(const std::vector<Example>& train) {
  FeatureStats st;
  st.mean.fill(0.0);
  st.stddev.fill(1.0);
  for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
    if (!is_count_feature(s)) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& ex : train) {
      for (const auto& node : ex.graph.nodes) {
        if (!node.features.present[s]) continue;
        sum += node.features.values[s];
        ++n;
      }
    }
    if (n == 0) {
      st.stddev[s] = 0.0;
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& ex : train) {
      for (const auto& node : ex.graph.nodes) {
        if (!node.features.present[s]) continue;
        const double d = node.features.values[s] - mean;
        ss += d * d;
      }
    }
    st.mean[s] = mean;
    st.stddev[s] = std::sqrt(ss / static_cast<double>(n));
  }
  return st;
}

void apply_feature_stats(std::vector<Example>& examples, const FeatureStats& stats) {
  for (auto& ex : examples) {
    for (auto& node : ex.graph.nodes) {
      for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
        if (!is_count_feature(s) || !node.features.present[s]) continue;
        double& v = node.features.values[s];
        v = stats.stddev[s] > 0.0 ? (v - stats.mean[s]) / stats.stddev[s] : 0.0;
      }
    }
  }
}

void normalize_features(Dataset& dataset, const std::vector<std::size_t>& train_indices) {
  const FeatureStats stats = fit_feature_stats(select(dataset.examples, train_indices));
  apply_feature_stats(dataset.examples, stats);
  dataset.stats = stats;
}

Split split_dataset(std::size_t n, double ratio, Rng rng) {
  if (n < 2) throw std::invalid_argument("split_dataset needs at least 2 examples");
  if (!(ratio > 0.0) || ratio >= 1.0) throw std::invalid_argument("split ratio must lie in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  return s;
}

std::vector<Example> select(const std::vector<Example>& examples, const std::vector<std::size_t>& indices) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(examples.at(i));
  return out;
}

std::size_t impute_all(std::vector<Example>& examples) {
  std::size_t fallbacks = 0;
  for (auto& ex : examples) {
    auto r = impute_user_features(std::move(ex.graph));
    ex.graph = std::move(r.graph);
    if (r.fallback_used) ++fallbacks;
  }
  return fallbacks;
}

// ---------------------------------------------------------------------------

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "tweets.jsonl", dir / "retweets.jsonl", dir / "users.jsonl"};
}

namespace {

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataFormatError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      f(j);
    } catch (const json::exception& e) {
      throw DataFormatError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataFormatError& e) {
      throw DataFormatError(path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw DataFormatError("id must be a string or integer");
}

double feature_value(const json& j) {
  if (j.is_boolean()) return j.get<bool>() ? 1.0 : 0.0;
  if (j.is_number()) return j.get<double>();
  throw DataFormatError("feature values must be numbers, booleans or null");
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& options) {
  std::vector<SourceTweet> tweets;
  std::set<std::string> tweet_ids;
  for_each_json_line(paths.tweets, [&](const json& j) {
    SourceTweet t;
    t.id = id_string(j.at("id"));
    if (t.id.empty()) throw DataFormatError("tweet id must be non-empty");
    t.text = j.at("text").get<std::string>();
    t.label = parse_label(j.at("label").get<std::string>());
    if (auto a = j.find("author_id"); a != j.end() && !a->is_null()) t.author_id = id_string(*a);
    if (!tweet_ids.insert(t.id).second) throw DataFormatError("duplicate tweet id " + t.id);
    tweets.push_back(std::move(t));
  });

  std::map<std::string, std::vector<RetweetRecord>> retweets;
  for_each_json_line(paths.retweets, [&](const json& j) {
    RetweetRecord r;
    r.tweet_id = id_string(j.at("tweet_id"));
    r.user_id = id_string(j.at("user_id"));
    const auto& o = j.at("order");
    if (!o.is_number_integer() || o.get<long long>() < 0) throw DataFormatError("order must be a non-negative integer");
    r.order = o.get<std::uint64_t>();
    if (auto p = j.find("parent_user_id"); p != j.end() && !p->is_null()) r.parent_user_id = id_string(*p);
    retweets[r.tweet_id].push_back(std::move(r));
  });

  std::map<std::string, UserFeatures> users;
  if (std::filesystem::exists(paths.users)) {
    for_each_json_line(paths.users, [&](const json& j) {
      const std::string uid = id_string(j.at("user_id"));
      UserFeatures f;
      if (auto feats = j.find("features"); feats != j.end() && !feats->is_null()) {
        for (const auto& [key, value] : feats->items()) {
          auto slot = user_feature_slot(key);
          if (!slot || value.is_null()) continue;
          f.values[*slot] = feature_value(value);
          f.present[*slot] = true;
        }
      }
      users[uid] = f;
    });
  } else {
    log_warning("users file " + paths.users.string() + " not found; every user is treated as missing");
  }

  Dataset ds;
  for (auto& t : tweets) {
    auto it = retweets.find(t.id);
    if (it == retweets.end()) throw DataFormatError("tweet " + t.id + " has no retweet records");
    auto records = std::move(it->second);
    if (options.max_retweets > 0 && records.size() > options.max_retweets) {
      std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
      records.resize(options.max_retweets);
    }
    auto graph = build_propagation_graph(std::move(records), options.builder, &users, t.author_id);
    ds.examples.push_back(Example{std::move(t), std::move(graph)});
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = DatasetPaths::in_directory(dir);
  std::ofstream tw(paths.tweets, std::ios::binary), rt(paths.retweets, std::ios::binary),
      us(paths.users, std::ios::binary);
  if (!tw || !rt || !us) throw DataFormatError("cannot write dataset files under " + dir.string());

  std::map<std::string, UserFeatures> written;
  std::vector<std::string> user_order;
  for (const auto& ex : dataset.examples) {
    json t = {{"id", ex.tweet.id}, {"text", ex.tweet.text}, {"label", label_name(ex.tweet.label)}};
    if (ex.tweet.author_id) t["author_id"] = *ex.tweet.author_id;
    tw << t.dump() << "\n";
    for (const auto& node : ex.graph.nodes) {
      json r = {{"tweet_id", ex.tweet.id}, {"user_id", node.user_id}, {"order", node.order}};
      if (node.parent) r["parent_user_id"] = ex.graph.nodes[*node.parent].user_id;
      rt << r.dump() << "\n";
      if (node.features.missing()) continue;
      auto [it, inserted] = written.emplace(node.user_id, node.features);
      if (inserted) {
        user_order.push_back(node.user_id);
      } else if (!(it->second == node.features)) {
        throw DataFormatError("user " + node.user_id + " appears with conflicting feature records");
      }
    }
  }
  for (const auto& uid : user_order) {
    const auto& f = written.at(uid);
    json feats = json::object();
    for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
      const std::string key(kUserFeatureNames[s]);
      if (f.present[s]) {
        feats[key] = f.values[s];
      } else {
        feats[key] = nullptr;
      }
    }
    us << json{{"user_id", uid}, {"features", feats}}.dump() << "\n";
  }
}

}  // namespace mvan
