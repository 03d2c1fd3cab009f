#include "mvan/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "mvan/log.hpp"

namespace mvan {

bool is_count_feature(std::size_t slot) {
  switch (slot) {
    case 3:   // favourites
    case 5:   // followers
    case 7:   // friends
    case 10:  // listed
    case 13:  // statuses
      return true;
    default:
      return false;
  }
}

std::optional<std::size_t> user_feature_slot(std::string_view name) {
  for (std::size_t i = 0; i < kNumUserFeatures; ++i) {
    if (kUserFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

UserFeatures UserFeatures::complete(const std::array<double, kNumUserFeatures>& v) {
  UserFeatures f;
  f.values = v;
  f.present.fill(true);
  return f;
}

bool UserFeatures::missing() const {
  return std::none_of(present.begin(), present.end(), [](bool p) { return p; });
}

bool UserFeatures::complete() const {
  return std::all_of(present.begin(), present.end(), [](bool p) { return p; });
}

GraphBuilder GraphBuilder::parse(std::string_view text) {
  if (text == "parent_tree") return parent_tree();
  if (text == "chain") return chain(1);
  if (text.starts_with("chain(") && text.ends_with(")")) {
    const std::string inner(text.substr(6, text.size() - 7));
    std::size_t pos = 0;
    unsigned long k = 0;
    try {
      k = std::stoul(inner, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == inner.size() && k >= 1) return chain(k);
  }
  throw std::invalid_argument("unknown graph builder '" + std::string(text) + "' (expected chain(k) or parent_tree)");
}

std::string GraphBuilder::to_string() const {
  return kind == Kind::ParentTree ? "parent_tree" : "chain(" + std::to_string(k) + ")";
}

std::size_t PropagationGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency) n += a.size();
  return n;
}

bool PropagationGraph::has_self_loops() const {
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    if (!std::binary_search(adjacency[i].begin(), adjacency[i].end(), i)) return false;
  }
  return adjacency.size() == nodes.size();
}

void rebuild_edges(PropagationGraph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::set<std::size_t>> adj(n);
  auto link = [&](std::size_t a, std::size_t b) {
    adj[a].insert(b);
    adj[b].insert(a);
  };
  for (std::size_t i = 0; i < n; ++i) {
    adj[i].insert(i);
    if (g.builder.kind == GraphBuilder::Kind::Chain) {
      for (std::size_t d = 1; d <= g.builder.k && d <= i; ++d) link(i, i - d);
    } else if (g.nodes[i].parent) {
      if (*g.nodes[i].parent >= i) throw GraphError("parent of node " + g.nodes[i].user_id + " is not earlier");
      link(i, *g.nodes[i].parent);
    } else if (i > 0) {
      link(i, i - 1);
    }
  }
  g.adjacency.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) g.adjacency[i].assign(adj[i].begin(), adj[i].end());
}

PropagationGraph build_propagation_graph(std::vector<RetweetRecord> records, const GraphBuilder& builder,
                                         const std::map<std::string, UserFeatures>* users,
                                         const std::optional<std::string>& source_author) {
  if (records.empty()) throw GraphError("cannot build a propagation graph from zero retweet records");
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].order == records[i - 1].order) {
      throw GraphError("duplicate retweet order " + std::to_string(records[i].order) + " for tweet " +
                       records[i].tweet_id);
    }
  }

  PropagationGraph g;
  g.builder = builder;
  std::unordered_map<std::string, std::size_t> first_index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    PropagationGraph::Node node;
    node.user_id = r.user_id;
    node.order = r.order;
    if (users) {
      if (auto it = users->find(r.user_id); it != users->end()) node.features = it->second;
    }
    if (r.parent_user_id && (!source_author || *r.parent_user_id != *source_author)) {
      auto it = first_index.find(*r.parent_user_id);
      if (it == first_index.end()) {
        throw GraphError("retweet by " + r.user_id + " of tweet " + r.tweet_id + " names parent '" +
                         *r.parent_user_id + "' which is not an earlier retweeter");
      }
      node.parent = it->second;
    }
    first_index.emplace(r.user_id, i);
    g.nodes.push_back(std::move(node));
  }
  rebuild_edges(g);
  return g;
}

ImputationResult impute_user_features(PropagationGraph graph) {
  std::array<double, kNumUserFeatures> sum{};
  std::array<std::size_t, kNumUserFeatures> count{};
  for (const auto& n : graph.nodes) {
    for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
      if (n.features.present[s]) {
        sum[s] += n.features.values[s];
        ++count[s];
      }
    }
  }
  ImputationResult result;
  for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
    if (count[s] == 0) result.fallback_used = true;
  }
  for (auto& n : graph.nodes) {
    for (std::size_t s = 0; s < kNumUserFeatures; ++s) {
      if (n.features.present[s]) continue;
      n.features.values[s] = count[s] ? sum[s] / static_cast<double>(count[s]) : 0.0;
      n.features.present[s] = true;
    }
  }
  if (result.fallback_used) {
    log_warning("propagation graph has no user with known features in some slot; filled with zeros");
  }
  result.graph = std::move(graph);
  return result;
}

PropagationGraph truncate_by_deadline(const PropagationGraph& graph, double keep_fraction) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("keep_fraction must lie in (0, 1]");
  }
  const std::size_t n = graph.nodes.size();
  // The epsilon keeps products such as 0.1 * 30 from rounding up to 4.
  auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);
  PropagationGraph out;
  out.builder = graph.builder;
  out.nodes.assign(graph.nodes.begin(), graph.nodes.begin() + static_cast<std::ptrdiff_t>(keep));
  for (auto& node : out.nodes) {
    if (node.parent && *node.parent >= keep) node.parent.reset();
  }
  rebuild_edges(out);
  return out;
}

}  // namespace mvan
