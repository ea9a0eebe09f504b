#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frisk/transform.hpp"

namespace frisk {

enum class ClusterAlgorithm { kmeans, agglomerative };

std::string to_string(ClusterAlgorithm a);
ClusterAlgorithm cluster_algorithm_from_string(const std::string& s);

/// Cluster id (1..k) for every SFM row, keyed by (owner, subject).
class ClusterAssignment {
public:
    ClusterAssignment() = default;
    ClusterAssignment(SfmKind kind, int k, std::vector<RecordKey> keys, std::vector<int> ids,
                      std::vector<std::vector<double>> centroids = {});

    SfmKind kind() const noexcept { return kind_; }
    int k() const noexcept { return k_; }
    const std::vector<RecordKey>& keys() const noexcept { return keys_; }
    const std::vector<int>& ids() const noexcept { return ids_; }
    const std::vector<std::vector<double>>& centroids() const noexcept { return centroids_; }

    std::optional<int> find(const NodeId& owner, const NodeId& subject) const;
    int at(const NodeId& owner, const NodeId& subject) const;
    std::vector<std::size_t> sizes() const;  ///< index c-1 holds |cluster c|

private:
    SfmKind kind_ = SfmKind::friends;
    int k_ = 0;
    std::vector<RecordKey> keys_;
    std::vector<int> ids_;
    std::vector<std::vector<double>> centroids_;
    std::map<RecordKey, std::size_t> index_;
};

struct KMeansOptions {
    int max_iter = 300;
    double tolerance = 1e-9;  ///< max centroid movement (Euclidean)
    int restarts = 10;        ///< independent k-means++ starts; the lowest SSE is kept
};

struct KMeansFit {
    std::vector<int> labels;       ///< 0-based
    Eigen::MatrixXd centroids;     ///< k x d
    std::vector<double> objective; ///< within-cluster SSE after each iteration
    int iterations = 0;
    bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs. Nearest-centroid ties go to the
/// lower cluster index; an emptied cluster is re-seeded with the point
/// farthest from its centroid.
KMeansFit kmeans_fit(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& opts = {});

ClusterAssignment kmeans(const Sfm& rows, int k, std::uint64_t seed, const KMeansOptions& opts = {});

struct Merge {
    int left = 0;   ///< node id: < n is a leaf, n + i is the cluster made by merge i
    int right = 0;
    double distance = 0.0;
    int size = 0;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;  ///< non-decreasing distance
};

/// Complete-linkage hierarchy via the nearest-neighbor chain algorithm
/// (O(n^2) time, condensed distance matrix).
Dendrogram complete_linkage(const Eigen::MatrixXd& points);

/// Labels (0-based, numbered by first appearance) after applying the first
/// leaves - k merges.
std::vector<int> cut_dendrogram(const Dendrogram& tree, int k);

ClusterAssignment agglomerative(const Sfm& rows, int target_k);

ClusterAssignment run_clustering(const Sfm& rows, ClusterAlgorithm algorithm, int k, std::uint64_t seed);

/// Within-cluster sum of squared distances to the cluster means.
double within_cluster_sse(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Hubert-Arabie adjusted Rand index of two labelings of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// CSV: owner_id,subject_id,cluster_id.
void write_assignment_csv(const std::string& path, const ClusterAssignment& a);
ClusterAssignment read_assignment_csv(const std::string& path, SfmKind kind);

} // namespace frisk
