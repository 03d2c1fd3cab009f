#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvan {

inline constexpr std::size_t kNumUserFeatures = 15;

/// Profile fields in the fixed slot order used for every feature vector.
inline constexpr std::array<std::string_view, kNumUserFeatures> kUserFeatureNames = {
    "user_contributors_enabled",
    "user_default_profile",
    "user_default_profile_image",
    "user_favourites_count",
    "user_follow_request_sent",
    "user_followers_count",
    "user_following",
    "user_friends_count",
    "user_geo_enabled",
    "user_has_extended_profile",
    "user_listed_count",
    "user_profile_use_background_image",
    "user_protected",
    "user_statuses_count",
    "user_verified",
};

/// True for integer count fields; the rest are binary flags.
bool is_count_feature(std::size_t slot);
std::optional<std::size_t> user_feature_slot(std::string_view name);

/// One user's profile. Absent fields are tracked per slot; a record with no
/// present slot is a missing user.
struct UserFeatures {
  std::array<double, kNumUserFeatures> values{};
  std::array<bool, kNumUserFeatures> present{};

  static UserFeatures missing_record() { return {}; }
  static UserFeatures complete(const std::array<double, kNumUserFeatures>& v);
  bool missing() const;
  bool complete() const;

  friend bool operator==(const UserFeatures&, const UserFeatures&) = default;
};

struct RetweetRecord {
  std::string tweet_id;
  std::string user_id;
  std::uint64_t order = 0;
  std::optional<std::string> parent_user_id;

  friend bool operator==(const RetweetRecord&, const RetweetRecord&) = default;
};

/// How edges between retweeters are derived.
struct GraphBuilder {
  enum class Kind { Chain, ParentTree };
  Kind kind = Kind::Chain;
  std::size_t k = 1;  // chain width

  static GraphBuilder chain(std::size_t k = 1) { return {Kind::Chain, k}; }
  static GraphBuilder parent_tree() { return {Kind::ParentTree, 1}; }
  static GraphBuilder parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const GraphBuilder&, const GraphBuilder&) = default;
};

struct PropagationGraph {
  struct Node {
    std::string user_id;
    UserFeatures features;
    std::uint64_t order = 0;
    /// Index of the parent node, when the record named one inside the graph.
    std::optional<std::size_t> parent;

    friend bool operator==(const Node&, const Node&) = default;
  };

  std::vector<Node> nodes;  // sorted by retweet order
  /// Sorted neighbor lists; every list contains its own node.
  std::vector<std::vector<std::size_t>> adjacency;
  GraphBuilder builder;

  std::size_t size() const { return nodes.size(); }
  std::size_t edge_count() const;
  bool has_self_loops() const;

  friend bool operator==(const PropagationGraph&, const PropagationGraph&) = default;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds the retweet graph of one tweet. A parent equal to `source_author`
/// means a direct retweet of the source and is treated as "no parent".
/// Nodes get features from `users` when present, otherwise a missing record.
PropagationGraph build_propagation_graph(std::vector<RetweetRecord> records, const GraphBuilder& builder,
                                         const std::map<std::string, UserFeatures>* users = nullptr,
                                         const std::optional<std::string>& source_author = std::nullopt);

/// Recomputes adjacency from node order and parent links using the graph's
/// builder.
void rebuild_edges(PropagationGraph& graph);

struct ImputationResult {
  PropagationGraph graph;
  bool fallback_used = false;  // no donor for at least one slot; zeros used
};

/// Fills every absent slot with the mean of that slot over nodes where it is
/// present. Binary slots keep the fractional mean.
ImputationResult impute_user_features(PropagationGraph graph);

/// Keeps the earliest ceil(keep_fraction * n) retweeters and re-derives edges
/// among them.
PropagationGraph truncate_by_deadline(const PropagationGraph& graph, double keep_fraction);

}  // namespace mvan
