#include "frisk/network.hpp"

#include <algorithm>

#include "frisk/error.hpp"

namespace frisk {

bool is_visibility_feature(std::string_view name) {
    constexpr std::string_view suffix = "visibility";
    return name.size() >= suffix.size() && name.substr(name.size() - suffix.size()) == suffix;
}

SocialNetwork::SocialNetwork(std::vector<std::string> features,
                             std::vector<NodeSpec> nodes,
                             const std::vector<std::pair<NodeId, NodeId>>& edges)
    : features_(std::move(features)) {
    {
        std::set<std::string> seen;
        for (const auto& f : features_) {
            if (f.empty()) throw Error("features: empty feature name");
            if (!seen.insert(f).second) throw Error("features: duplicate feature '" + f + "'");
        }
    }

    std::sort(nodes.begin(), nodes.end(),
              [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id.empty()) throw Error("nodes: empty node id");
        if (i > 0 && nodes[i].id == nodes[i - 1].id)
            throw Error("nodes: duplicate node id '" + nodes[i].id + "'");
    }

    const std::size_t nf = features_.size();
    ids_.reserve(nodes.size());
    codes_.resize(nodes.size() * nf);
    categories_.assign(nf, {});
    std::vector<std::unordered_map<std::string, std::uint32_t>> interned(nf);

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto& spec = nodes[i];
        for (const auto& [key, _] : spec.profile) {
            if (std::find(features_.begin(), features_.end(), key) == features_.end())
                throw Error("node '" + spec.id + "': unknown feature '" + key + "'");
        }
        for (std::size_t f = 0; f < nf; ++f) {
            std::string v{kHidden};
            if (auto it = spec.profile.find(features_[f]); it != spec.profile.end() && !it->second.empty())
                v = it->second;
            if (is_visibility_feature(features_[f]) && v != kHidden && v != kVisible)
                throw Error("node '" + spec.id + "': visibility feature '" + features_[f] +
                            "' must be 'visible' or 'hidden', got '" + v + "'");
            auto [it, inserted] = interned[f].try_emplace(v, static_cast<std::uint32_t>(categories_[f].size()));
            if (inserted) categories_[f].push_back(v);
            codes_[i * nf + f] = it->second;
        }
        index_.emplace(spec.id, static_cast<NodeIndex>(i));
        ids_.push_back(std::move(spec.id));
    }

    std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
    pairs.reserve(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& [a, b] = edges[e];
        auto ia = index_.find(a);
        auto ib = index_.find(b);
        if (ia == index_.end())
            throw Error("edges[" + std::to_string(e) + "]: unknown endpoint '" + a + "'");
        if (ib == index_.end())
            throw Error("edges[" + std::to_string(e) + "]: unknown endpoint '" + b + "'");
        if (ia->second == ib->second)
            throw Error("edges[" + std::to_string(e) + "]: self-loop on '" + a + "'");
        pairs.emplace_back(std::min(ia->second, ib->second), std::max(ia->second, ib->second));
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    edge_count_ = pairs.size();

    std::vector<std::size_t> degree(ids_.size(), 0);
    for (const auto& [a, b] : pairs) {
        ++degree[a];
        ++degree[b];
    }
    offsets_.assign(ids_.size() + 1, 0);
    for (std::size_t i = 0; i < ids_.size(); ++i) offsets_[i + 1] = offsets_[i] + degree[i];
    adjacency_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [a, b] : pairs) {
        adjacency_[cursor[a]++] = b;
        adjacency_[cursor[b]++] = a;
    }
    for (std::size_t i = 0; i < ids_.size(); ++i)
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]));
}

std::optional<std::size_t> SocialNetwork::feature_index(std::string_view name) const {
    for (std::size_t f = 0; f < features_.size(); ++f)
        if (features_[f] == name) return f;
    return std::nullopt;
}

bool SocialNetwork::contains(std::string_view id) const {
    return index_.find(std::string(id)) != index_.end();
}

NodeIndex SocialNetwork::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw Error("unknown node '" + std::string(id) + "'");
    return it->second;
}

std::span<const NodeIndex> SocialNetwork::neighbors(NodeIndex i) const {
    return {adjacency_.data() + offsets_.at(i), adjacency_.data() + offsets_.at(i + 1)};
}

bool SocialNetwork::adjacent(NodeIndex a, NodeIndex b) const {
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
}

const std::string& SocialNetwork::value(NodeIndex i, std::size_t f) const {
    return categories_.at(f).at(code(i, f));
}

std::map<std::string, std::string> SocialNetwork::profile(NodeIndex i) const {
    std::map<std::string, std::string> out;
    for (std::size_t f = 0; f < features_.size(); ++f) out.emplace(features_[f], value(i, f));
    return out;
}

std::vector<std::pair<NodeId, NodeId>> SocialNetwork::edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(edge_count_);
    for (NodeIndex a = 0; a < ids_.size(); ++a)
        for (NodeIndex b : neighbors(a))
            if (a < b) out.emplace_back(ids_[a], ids_[b]);
    return out;
}

EgoGraph build_ego_graph(const SocialNetwork& net, std::string_view owner) {
    const NodeIndex u = net.index_of(owner);
    EgoGraph ego;
    ego.owner = std::string(owner);

    std::vector<NodeIndex> members{u};
    for (NodeIndex f : net.neighbors(u)) {
        ego.friends.insert(net.id_of(f));
        members.push_back(f);
    }
    std::set<NodeIndex> strangers;
    for (NodeIndex f : net.neighbors(u))
        for (NodeIndex s : net.neighbors(f))
            if (s != u && !net.adjacent(u, s)) strangers.insert(s);
    for (NodeIndex s : strangers) {
        ego.strangers.insert(net.id_of(s));
        members.push_back(s);
    }

    std::sort(members.begin(), members.end());
    for (NodeIndex a : members)
        for (NodeIndex b : net.neighbors(a))
            if (a < b && std::binary_search(members.begin(), members.end(), b))
                ego.edges.emplace_back(net.id_of(a), net.id_of(b));
    return ego;
}

std::vector<NodeIndex> mutual_friend_indices(const SocialNetwork& net, NodeIndex u, NodeIndex s) {
    if (u == s) throw Error("mutual_friends: user and stranger are the same node '" + net.id_of(u) + "'");
    auto a = net.neighbors(u);
    auto b = net.neighbors(s);
    std::vector<NodeIndex> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

std::vector<NodeId> mutual_friends(const SocialNetwork& net, std::string_view u, std::string_view s) {
    std::vector<NodeId> out;
    for (NodeIndex m : mutual_friend_indices(net, net.index_of(u), net.index_of(s)))
        out.push_back(net.id_of(m));
    return out;
}

int capped_distance(const SocialNetwork& net, NodeIndex u, NodeIndex s) {
    if (u == s) return 0;
    if (net.adjacent(u, s)) return 1;
    auto a = net.neighbors(u);
    auto b = net.neighbors(s);
    // Sorted-range intersection test.
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return 2;
        if (*i < *j) ++i; else ++j;
    }
    return 3;
}

std::vector<RecordIssue> check_records(const SocialNetwork& net,
                                       const std::vector<RiskLabelRecord>& records) {
    std::vector<RecordIssue> issues;
    std::set<RecordKey> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.label < 1 || r.label > 3)
            issues.push_back({i, "label " + std::to_string(r.label) + " outside {1,2,3}"});
        if (!net.contains(r.user)) {
            issues.push_back({i, "unknown user '" + r.user + "'"});
            continue;
        }
        if (!net.contains(r.stranger)) {
            issues.push_back({i, "unknown stranger '" + r.stranger + "'"});
            continue;
        }
        const int d = capped_distance(net, net.index_of(r.user), net.index_of(r.stranger));
        if (d != 2) {
            const std::string what = d == 0 ? "is the user itself"
                                   : d == 1 ? "is a friend (distance 1)"
                                            : "is farther than 2 hops";
            issues.push_back({i, "distance violation: stranger '" + r.stranger + "' " + what +
                                     " of user '" + r.user + "'"});
        }
        if (!seen.insert({r.user, r.stranger}).second)
            issues.push_back({i, "duplicate label for (" + r.user + ", " + r.stranger + ")"});
    }
    return issues;
}

void validate_records(const SocialNetwork& net, const std::vector<RiskLabelRecord>& records) {
    auto issues = check_records(net, records);
    if (!issues.empty())
        throw Error("labels[" + std::to_string(issues.front().index) + "]: " + issues.front().message);
}

std::vector<RiskLabelRecord> first_group(const std::vector<RiskLabelRecord>& records,
                                         const SocialNetwork& net) {
    std::vector<RiskLabelRecord> out;
    for (const auto& r : records) {
        auto mf = mutual_friend_indices(net, net.index_of(r.user), net.index_of(r.stranger));
        if (mf.size() == 1) out.push_back(r);
    }
    return out;
}

double LabeledDataset::response_label(const RiskLabelRecord& r) const {
    if (auto it = continuous.find({r.user, r.stranger}); it != continuous.end()) return it->second;
    return static_cast<double>(r.label);
}

} // namespace frisk
