#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "frisk/network.hpp"
#include "frisk/random.hpp"
#include "helpers.hpp"

namespace testing {

// Count-and-divide over friend profiles, independent of the library.
inline double count_frequency(const frisk::SocialNetwork& net, const frisk::NodeId& owner, std::size_t feature,
                              const std::string& value) {
    auto adj = adjacency(net);
    std::size_t hits = 0;
    for (const auto& f : adj[owner]) hits += net.profile(net.index_of(f)).at(net.features()[feature]) == value;
    return static_cast<double>(hits) / static_cast<double>(adj[owner].size());
}

inline Eigen::MatrixXd random_points(int n, int d, std::uint64_t seed) {
    frisk::Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = frisk::uniform01(rng);
    return x;
}

// Naive complete linkage: merge the closest pair of clusters (max pairwise
// point distance) until k remain. Returns partition as sorted member lists.
inline std::vector<std::vector<int>> naive_complete_linkage(const Eigen::MatrixXd& x, int k) {
    std::vector<std::vector<int>> clusters;
    for (int i = 0; i < x.rows(); ++i) clusters.push_back({i});
    auto linkage = [&](const std::vector<int>& a, const std::vector<int>& b) {
        double d = 0.0;
        for (int i : a)
            for (int j : b) d = std::max(d, (x.row(i) - x.row(j)).norm());
        return d;
    };
    while (static_cast<int>(clusters.size()) > k) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        std::sort(clusters[bi].begin(), clusters[bi].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    std::sort(clusters.begin(), clusters.end());
    return clusters;
}

inline std::vector<std::vector<int>> partition_of(const std::vector<int>& labels) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> out;
    for (auto& [_, g] : groups) out.push_back(g);
    std::sort(out.begin(), out.end());
    return out;
}

struct Sample {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

// Labels 1 and 2 only: P(1) / P(2) = exp(alpha + beta * x).
inline Sample planted_binary(double alpha, double beta, int n, std::uint64_t seed) {
    frisk::Rng rng(seed);
    Sample s{Eigen::MatrixXd(n, 1), {}};
    for (int i = 0; i < n; ++i) {
        const double x = frisk::normal(rng);
        s.x(i, 0) = x;
        const double p1 = 1.0 / (1.0 + std::exp(-(alpha + beta * x)));
        s.y.push_back(frisk::uniform01(rng) < p1 ? 1 : 2);
    }
    return s;
}

inline Sample random_three_class(int n, int d, std::uint64_t seed) {
    frisk::Rng rng(seed);
    Sample s{Eigen::MatrixXd(n, d), {}};
    for (int i = 0; i < n; ++i) {
        double score = 0.0;
        for (int j = 0; j < d; ++j) {
            s.x(i, j) = frisk::uniform01(rng);
            score += (j % 2 ? -1.0 : 1.0) * s.x(i, j);
        }
        const double u = frisk::uniform01(rng) + 0.3 * score;
        s.y.push_back(u < 0.4 ? 1 : u < 0.8 ? 2 : 3);
    }
    return s;
}

inline double binary_loglik(const Sample& s, double a, double b) {
    double ll = 0.0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
        const double eta = a + b * s.x(static_cast<Eigen::Index>(i), 0);
        // log sigmoid(eta) or log sigmoid(-eta)
        const double z = s.y[i] == 1 ? eta : -eta;
        ll += -std::log1p(std::exp(-std::abs(z))) + std::min(z, 0.0);
    }
    return ll;
}

// Grid search over [-3,3]^2: coarse 0.1 grid, then repeated zoom on the
// best cell. The log-likelihood is concave so zooming keeps the optimum.
inline std::pair<double, double> grid_mle(const Sample& s) {
    double best_a = 0.0, best_b = 0.0, best = -INFINITY;
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j) {
            const double a = -3.0 + 0.1 * i, b = -3.0 + 0.1 * j;
            const double ll = binary_loglik(s, a, b);
            if (ll > best) best = ll, best_a = a, best_b = b;
        }
    double step = 0.1;
    for (int round = 0; round < 6; ++round) {
        const double ca = best_a, cb = best_b;
        for (int i = -20; i <= 20; ++i)
            for (int j = -20; j <= 20; ++j) {
                const double a = ca + step * i / 10.0, b = cb + step * j / 10.0;
                const double ll = binary_loglik(s, a, b);
                if (ll > best) best = ll, best_a = a, best_b = b;
            }
        step /= 10.0;
    }
    return {best_a, best_b};
}

} // namespace testing
