#include "frisk/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/random.hpp"

namespace frisk {

std::string to_string(ClusterAlgorithm a) { return a == ClusterAlgorithm::kmeans ? "kmeans" : "agglomerative"; }

ClusterAlgorithm cluster_algorithm_from_string(const std::string& s) {
    if (s == "kmeans") return ClusterAlgorithm::kmeans;
    if (s == "agglomerative") return ClusterAlgorithm::agglomerative;
    throw Error("unknown clustering algorithm '" + s + "' (expected kmeans or agglomerative)");
}

ClusterAssignment::ClusterAssignment(SfmKind kind, int k, std::vector<RecordKey> keys, std::vector<int> ids,
                                     std::vector<std::vector<double>> centroids)
    : kind_(kind), k_(k), keys_(std::move(keys)), ids_(std::move(ids)), centroids_(std::move(centroids)) {
    if (keys_.size() != ids_.size()) throw Error("cluster assignment: keys and ids differ in length");
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        if (ids_[i] < 1 || ids_[i] > k_)
            throw Error("cluster assignment: id " + std::to_string(ids_[i]) + " outside 1.." + std::to_string(k_));
        if (!index_.emplace(keys_[i], i).second)
            throw Error("cluster assignment: duplicate row (" + keys_[i].first + ", " + keys_[i].second + ")");
    }
}

std::optional<int> ClusterAssignment::find(const NodeId& owner, const NodeId& subject) const {
    auto it = index_.find({owner, subject});
    if (it == index_.end()) return std::nullopt;
    return ids_[it->second];
}

int ClusterAssignment::at(const NodeId& owner, const NodeId& subject) const {
    auto c = find(owner, subject);
    if (!c) throw Error("no " + to_string(kind_) + " cluster assigned to (" + owner + ", " + subject + ")");
    return *c;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(k_), 0);
    for (int id : ids_) ++out[static_cast<std::size_t>(id - 1)];
    return out;
}

namespace {

void check_k(std::size_t n, int k) {
    if (k <= 0) throw Error("cluster count must be positive, got " + std::to_string(k));
    if (static_cast<std::size_t>(k) > n)
        throw Error("cluster count " + std::to_string(k) + " exceeds number of rows " + std::to_string(n));
}

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index i, const Eigen::MatrixXd& centers, Eigen::Index c) {
    return (points.row(i) - centers.row(c)).squaredNorm();
}

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centers(k, points.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Eigen::Index first = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    centers.row(0) = points.row(first);
    chosen[static_cast<std::size_t>(first)] = true;

    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(points, i, centers, 0);

    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index pick = -1;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) {
                // Rounding at the tail: take the last point with positive weight.
                for (Eigen::Index i = n - 1; i >= 0; --i)
                    if (d2[static_cast<std::size_t>(i)] > 0.0) {
                        pick = i;
                        break;
                    }
            }
        } else {
            // All remaining points coincide with a center.
            for (Eigen::Index i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
        }
        centers.row(c) = points.row(pick);
        chosen[static_cast<std::size_t>(pick)] = true;
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(points, i, centers, c));
    }
    return centers;
}

// Moves the point farthest from its centroid (among clusters with >= 2
// members) into each empty cluster. Returns true if anything moved.
bool repair_empty(const Eigen::MatrixXd& points, Eigen::MatrixXd& centers, std::vector<int>& labels) {
    const int k = static_cast<int>(centers.rows());
    bool moved = false;
    for (int c = 0; c < k; ++c) {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        if (sizes[static_cast<std::size_t>(c)] > 0) continue;
        Eigen::Index far = -1;
        double best = -1.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const int l = labels[static_cast<std::size_t>(i)];
            if (sizes[static_cast<std::size_t>(l)] < 2) continue;
            const double d = squared_distance(points, i, centers, l);
            if (d > best) {
                best = d;
                far = i;
            }
        }
        if (far < 0) break;
        labels[static_cast<std::size_t>(far)] = c;
        centers.row(c) = points.row(far);
        moved = true;
    }
    return moved;
}

} // namespace

double within_cluster_sse(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) sums.row(c) /= counts[static_cast<std::size_t>(c)];
    double sse = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        sse += squared_distance(points, i, sums, labels[static_cast<std::size_t>(i)]);
    return sse;
}

namespace {

KMeansFit lloyd(const Eigen::MatrixXd& points, int k, Rng& rng, const KMeansOptions& opts) {
    const Eigen::Index n = points.rows();
    KMeansFit fit;
    fit.centroids = plus_plus_seeds(points, k, rng);
    fit.labels.assign(static_cast<std::size_t>(n), -1);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(points, i, fit.centroids, 0);
            for (int c = 1; c < k; ++c) {
                const double d = squared_distance(points, i, fit.centroids, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (fit.labels[static_cast<std::size_t>(i)] != best) {
                fit.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        const bool repaired = repair_empty(points, fit.centroids, fit.labels);

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            next.row(fit.labels[static_cast<std::size_t>(i)]) += points.row(i);
            counts[static_cast<std::size_t>(fit.labels[static_cast<std::size_t>(i)])] += 1.0;
        }
        double movement = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0)
                next.row(c) /= counts[static_cast<std::size_t>(c)];
            else
                next.row(c) = fit.centroids.row(c);
            movement = std::max(movement, (next.row(c) - fit.centroids.row(c)).norm());
        }
        fit.centroids = std::move(next);

        double sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            sse += squared_distance(points, i, fit.centroids, fit.labels[static_cast<std::size_t>(i)]);
        fit.objective.push_back(sse);
        fit.iterations = iter + 1;

        if (!repaired && (!changed || movement < opts.tolerance)) {
            fit.converged = true;
            break;
        }
    }
    // Only reachable with fewer distinct points than k: keep every cluster non-empty.
    repair_empty(points, fit.centroids, fit.labels);
    return fit;
}

} // namespace

KMeansFit kmeans_fit(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& opts) {
    check_k(static_cast<std::size_t>(points.rows()), k);
    if (opts.restarts < 1 || opts.max_iter < 1) throw Error("kmeans: restarts and max_iter must be at least 1");
    Rng rng(seed);
    KMeansFit best = lloyd(points, k, rng, opts);
    for (int r = 1; r < opts.restarts; ++r) {
        auto fit = lloyd(points, k, rng, opts);
        // Strictly lower SSE wins, so ties keep the earlier run.
        if (fit.objective.back() < best.objective.back()) best = std::move(fit);
    }
    return best;
}

ClusterAssignment kmeans(const Sfm& rows, int k, std::uint64_t seed, const KMeansOptions& opts) {
    auto fit = kmeans_fit(rows.matrix(), k, seed, opts);
    std::vector<RecordKey> keys;
    std::vector<int> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        keys.emplace_back(rows.rows()[i].owner, rows.rows()[i].subject);
        ids.push_back(fit.labels[i] + 1);
    }
    std::vector<std::vector<double>> centroids;
    for (Eigen::Index c = 0; c < fit.centroids.rows(); ++c) {
        std::vector<double> v(static_cast<std::size_t>(fit.centroids.cols()));
        for (Eigen::Index j = 0; j < fit.centroids.cols(); ++j) v[static_cast<std::size_t>(j)] = fit.centroids(c, j);
        centroids.push_back(std::move(v));
    }
    return ClusterAssignment(rows.kind(), k, std::move(keys), std::move(ids), std::move(centroids));
}

namespace {

// Condensed upper-triangular storage of pairwise distances.
class CondensedMatrix {
public:
    explicit CondensedMatrix(std::size_t n) : n_(n), data_(n * (n - 1) / 2) {}
    double& operator()(std::size_t i, std::size_t j) { return data_[offset(i, j)]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[offset(i, j)]; }

private:
    std::size_t offset(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return n_ * i - i * (i + 1) / 2 + (j - i - 1);
    }
    std::size_t n_;
    std::vector<double> data_;
};

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n), node(n) {
        std::iota(parent.begin(), parent.end(), 0);
        std::iota(node.begin(), node.end(), 0);
    }
    std::size_t root(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    std::vector<std::size_t> parent;
    std::vector<int> node;  ///< dendrogram node id of each root
};

} // namespace

Dendrogram complete_linkage(const Eigen::MatrixXd& points) {
    const std::size_t n = static_cast<std::size_t>(points.rows());
    Dendrogram tree;
    tree.leaves = n;
    if (n < 2) return tree;

    CondensedMatrix dist(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist(i, j) = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();

    std::vector<bool> active(n, true);
    std::vector<int> size(n, 1);
    struct RawMerge {
        std::size_t a, b;
        double d;
    };
    std::vector<RawMerge> raw;
    raw.reserve(n - 1);
    std::vector<std::size_t> chain;

    for (std::size_t remaining = n; remaining > 1; --remaining) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        std::size_t a = 0, b = 0;
        double best = 0.0;
        for (;;) {
            a = chain.back();
            // Prefer the previous chain element on ties so the chain terminates.
            std::size_t candidate = n;
            best = std::numeric_limits<double>::infinity();
            if (chain.size() >= 2) {
                candidate = chain[chain.size() - 2];
                best = dist(a, candidate);
            }
            for (std::size_t c = 0; c < n; ++c) {
                if (!active[c] || c == a) continue;
                const double d = dist(a, c);
                if (d < best) {
                    best = d;
                    candidate = c;
                }
            }
            b = candidate;
            if (chain.size() >= 2 && b == chain[chain.size() - 2]) break;
            chain.push_back(b);
        }
        chain.pop_back();
        chain.pop_back();
        if (a > b) std::swap(a, b);
        raw.push_back({a, b, best});
        // Lance-Williams update for complete linkage; the merged cluster lives in slot a.
        active[b] = false;
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == a) continue;
            dist(a, c) = std::max(dist(a, c), dist(b, c));
        }
        size[a] += size[b];
    }

    std::stable_sort(raw.begin(), raw.end(), [](const RawMerge& x, const RawMerge& y) { return x.d < y.d; });
    UnionFind uf(n);
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const std::size_t ra = uf.root(raw[m].a);
        const std::size_t rb = uf.root(raw[m].b);
        Merge merge;
        merge.left = std::min(uf.node[ra], uf.node[rb]);
        merge.right = std::max(uf.node[ra], uf.node[rb]);
        merge.distance = raw[m].d;
        const int left_size = uf.node[ra] < static_cast<int>(n) ? 1 : tree.merges[static_cast<std::size_t>(uf.node[ra]) - n].size;
        const int right_size = uf.node[rb] < static_cast<int>(n) ? 1 : tree.merges[static_cast<std::size_t>(uf.node[rb]) - n].size;
        merge.size = left_size + right_size;
        tree.merges.push_back(merge);
        uf.parent[rb] = ra;
        uf.node[ra] = static_cast<int>(n + m);
    }
    return tree;
}

std::vector<int> cut_dendrogram(const Dendrogram& tree, int k) {
    const std::size_t n = tree.leaves;
    check_k(n, k);
    // Leaves of each node, expanded lazily through a union-find over leaves.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::size_t> representative(n + tree.merges.size());
    for (std::size_t i = 0; i < n; ++i) representative[i] = i;
    const std::size_t apply = n - static_cast<std::size_t>(k);
    for (std::size_t m = 0; m < tree.merges.size(); ++m) {
        const auto& mg = tree.merges[m];
        const std::size_t ra = root(representative[static_cast<std::size_t>(mg.left)]);
        const std::size_t rb = root(representative[static_cast<std::size_t>(mg.right)]);
        representative[n + m] = ra;
        if (m < apply) parent[rb] = ra;
    }
    std::vector<int> labels(n, -1);
    std::map<std::size_t, int> numbering;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, _] = numbering.try_emplace(root(i), static_cast<int>(numbering.size()));
        labels[i] = it->second;
    }
    return labels;
}

ClusterAssignment agglomerative(const Sfm& rows, int target_k) {
    check_k(rows.size(), target_k);
    const auto labels = cut_dendrogram(complete_linkage(rows.matrix()), target_k);
    std::vector<RecordKey> keys;
    std::vector<int> ids;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        keys.emplace_back(rows.rows()[i].owner, rows.rows()[i].subject);
        ids.push_back(labels[i] + 1);
    }
    return ClusterAssignment(rows.kind(), target_k, std::move(keys), std::move(ids));
}

ClusterAssignment run_clustering(const Sfm& rows, ClusterAlgorithm algorithm, int k, std::uint64_t seed) {
    return algorithm == ClusterAlgorithm::kmeans ? kmeans(rows, k, seed) : agglomerative(rows, k);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: labelings differ in length");
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [_, c] : joint) index += choose2(c);
    for (const auto& [_, c] : ra) sa += choose2(c);
    for (const auto& [_, c] : rb) sb += choose2(c);
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = total > 0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

void write_assignment_csv(const std::string& path, const ClusterAssignment& a) {
    std::ostringstream os;
    csv::write_row(os, {"owner_id", "subject_id", "cluster_id"});
    for (std::size_t i = 0; i < a.keys().size(); ++i)
        csv::write_row(os, {a.keys()[i].first, a.keys()[i].second, std::to_string(a.ids()[i])});
    io::write_text(path, os.str());
}

ClusterAssignment read_assignment_csv(const std::string& path, SfmKind kind) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path + ":1", "missing header");
    csv::expect_header(rows.front(), {"owner_id", "subject_id", "cluster_id"}, path);
    std::vector<RecordKey> keys;
    std::vector<int> ids;
    int k = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string locus = path + ":" + std::to_string(rows[r].line);
        const auto& f = rows[r].fields;
        if (f.size() != 3) throw ParseError(locus, "expected 3 fields");
        const auto id = csv::parse_int(f[2], locus);
        if (id < 1) throw ParseError(locus, "cluster id must be >= 1");
        keys.emplace_back(f[0], f[1]);
        ids.push_back(static_cast<int>(id));
        k = std::max(k, static_cast<int>(id));
    }
    try {
        return ClusterAssignment(kind, k, std::move(keys), std::move(ids));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(path, e.what());
    }
}

} // namespace frisk
