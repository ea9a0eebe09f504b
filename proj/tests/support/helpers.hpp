#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "frisk/network.hpp"
#include "frisk/random.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("frisk_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

using Edge = std::pair<frisk::NodeId, frisk::NodeId>;

/// Nodes without profile values (every feature "hidden").
inline frisk::SocialNetwork bare_network(const std::vector<std::string>& ids, const std::vector<Edge>& edges,
                                         std::vector<std::string> features = {"a"}) {
    std::vector<frisk::NodeSpec> nodes;
    for (const auto& id : ids) nodes.push_back({id, {}});
    return frisk::SocialNetwork(std::move(features), std::move(nodes), edges);
}

/// Erdos-Renyi graph on n nodes "n00".."n<n-1>" with random categorical
/// profiles over `features` features and `categories` values each.
inline frisk::SocialNetwork random_network(std::size_t n, double p, std::uint64_t seed, std::size_t features = 3,
                                           std::size_t categories = 3) {
    frisk::Rng rng(seed);
    std::vector<std::string> names;
    for (std::size_t f = 0; f < features; ++f) names.push_back("f" + std::to_string(f));
    std::vector<frisk::NodeSpec> nodes;
    auto id = [](std::size_t i) { return (i < 10 ? "n0" : "n") + std::to_string(i); };
    for (std::size_t i = 0; i < n; ++i) {
        frisk::NodeSpec spec{id(i), {}};
        for (const auto& f : names) spec.profile[f] = "v" + std::to_string(frisk::uniform_index(rng, categories));
        nodes.push_back(spec);
    }
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (frisk::uniform01(rng) < p) edges.emplace_back(id(i), id(j));
    return frisk::SocialNetwork(names, nodes, edges);
}

/// Adjacency sets straight from the canonical edge list.
inline std::map<frisk::NodeId, std::set<frisk::NodeId>> adjacency(const frisk::SocialNetwork& net) {
    std::map<frisk::NodeId, std::set<frisk::NodeId>> adj;
    for (const auto& id : net.nodes()) adj[id];
    for (const auto& [a, b] : net.edges()) {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    return adj;
}

/// Plain breadth-first hop distances from `src` (-1 when unreachable).
inline std::map<frisk::NodeId, int> bfs_distances(const frisk::SocialNetwork& net, const frisk::NodeId& src) {
    auto adj = adjacency(net);
    std::map<frisk::NodeId, int> dist;
    for (const auto& id : net.nodes()) dist[id] = -1;
    std::vector<frisk::NodeId> frontier{src};
    dist[src] = 0;
    while (!frontier.empty()) {
        std::vector<frisk::NodeId> next;
        for (const auto& v : frontier)
            for (const auto& w : adj[v])
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    next.push_back(w);
                }
        frontier = std::move(next);
    }
    return dist;
}

} // namespace testing
