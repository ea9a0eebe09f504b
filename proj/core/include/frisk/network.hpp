#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace frisk {

using NodeId = std::string;
using NodeIndex = std::uint32_t;

/// Category used for withheld or absent profile attributes.
inline constexpr std::string_view kHidden = "hidden";
inline constexpr std::string_view kVisible = "visible";

/// Features whose name ends in "visibility" are binary privacy settings and
/// only admit the values "visible" and "hidden".
bool is_visibility_feature(std::string_view feature_name);

/// Input form of a node: id plus a sparse feature -> value map. Features not
/// present in the map (or mapped to "") become "hidden".
struct NodeSpec {
    NodeId id;
    std::map<std::string, std::string> profile;
};

/// Undirected social network with categorical profiles. Immutable after
/// construction; every accessor is a pure read.
///
/// Nodes are stored sorted by id and addressed internally by NodeIndex.
/// Profile values are interned per feature so equality tests on values are
/// integer comparisons.
class SocialNetwork {
public:
    SocialNetwork() = default;
    SocialNetwork(std::vector<std::string> features,
                  std::vector<NodeSpec> nodes,
                  const std::vector<std::pair<NodeId, NodeId>>& edges);

    const std::vector<std::string>& features() const noexcept { return features_; }
    std::size_t feature_count() const noexcept { return features_.size(); }
    std::optional<std::size_t> feature_index(std::string_view name) const;

    std::size_t node_count() const noexcept { return ids_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }
    const std::vector<NodeId>& nodes() const noexcept { return ids_; }
    bool contains(std::string_view id) const;
    /// Throws frisk::Error naming the id when it is not a node.
    NodeIndex index_of(std::string_view id) const;
    const NodeId& id_of(NodeIndex i) const { return ids_.at(i); }

    /// Sorted neighbor indices.
    std::span<const NodeIndex> neighbors(NodeIndex i) const;
    bool adjacent(NodeIndex a, NodeIndex b) const;

    /// Interned category code of feature `f` for node `i`.
    std::uint32_t code(NodeIndex i, std::size_t f) const { return codes_[i * features_.size() + f]; }
    const std::string& value(NodeIndex i, std::size_t f) const;
    /// Full profile as (feature, value) pairs in feature order.
    std::map<std::string, std::string> profile(NodeIndex i) const;
    /// Category values of feature `f` indexed by code.
    const std::vector<std::string>& categories(std::size_t f) const { return categories_.at(f); }

    /// Canonical edge list: each pair stored smaller id first, sorted.
    std::vector<std::pair<NodeId, NodeId>> edges() const;

private:
    std::vector<std::string> features_;
    std::vector<NodeId> ids_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<std::size_t> offsets_;
    std::vector<NodeIndex> adjacency_;
    std::size_t edge_count_ = 0;
    std::vector<std::uint32_t> codes_;
    std::vector<std::vector<std::string>> categories_;
};

/// Two-hop neighborhood of a user: friends at distance 1, strangers at
/// distance exactly 2, and the induced edges among owner, friends, strangers.
struct EgoGraph {
    NodeId owner;
    std::set<NodeId> friends;
    std::set<NodeId> strangers;
    std::vector<std::pair<NodeId, NodeId>> edges;
};

EgoGraph build_ego_graph(const SocialNetwork& net, std::string_view owner);

/// Sorted common neighbors of u and s. Rejects u == s.
std::vector<NodeIndex> mutual_friend_indices(const SocialNetwork& net, NodeIndex u, NodeIndex s);
std::vector<NodeId> mutual_friends(const SocialNetwork& net, std::string_view u, std::string_view s);

/// Hop distance capped at 3 (3 means "3 or more / unreachable").
int capped_distance(const SocialNetwork& net, NodeIndex u, NodeIndex s);

struct RiskLabelRecord {
    NodeId user;
    NodeId stranger;
    int label = 0;

    friend bool operator==(const RiskLabelRecord&, const RiskLabelRecord&) = default;
};

struct RecordIssue {
    std::size_t index = 0;
    std::string message;
};

/// All invariant violations of a record list against the network: unknown
/// nodes, label outside {1,2,3}, stranger not at distance exactly 2,
/// duplicate (user, stranger) pairs.
std::vector<RecordIssue> check_records(const SocialNetwork& net,
                                       const std::vector<RiskLabelRecord>& records);

/// Throws on the first issue reported by check_records.
void validate_records(const SocialNetwork& net, const std::vector<RiskLabelRecord>& records);

/// Records whose user and stranger share exactly one friend, order preserved.
std::vector<RiskLabelRecord> first_group(const std::vector<RiskLabelRecord>& records,
                                         const SocialNetwork& net);

using RecordKey = std::pair<NodeId, NodeId>;

/// Network plus labels. `continuous` optionally carries real-valued labels
/// keyed by (user, stranger); when present they replace the integer label
/// as the regression response.
struct LabeledDataset {
    SocialNetwork net;
    std::vector<RiskLabelRecord> records;
    std::map<RecordKey, double> continuous;

    double response_label(const RiskLabelRecord& r) const;
};

} // namespace frisk
