#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/baseline.hpp"
#include "frisk/cluster.hpp"
#include "frisk/impact.hpp"
#include "frisk/risklabel.hpp"

namespace frisk {

struct ClusterConfig {
    ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
    int k = 6;
    /// Explicit seed; when absent it is derived from the master seed.
    std::optional<std::uint64_t> seed;
};

struct BaselineConfig {
    double ridge = 1e-4;
    int max_iter = 100;
    int reference_label = 2;
    DesignOptions design;
};

struct ImpactConfig {
    ImpactMode mode = ImpactMode::single;
    PsFormula ps_formula = PsFormula::frequency_mean;
    /// First-group strangers serve as baseline training data and Past peers;
    /// by default they are not also used as impact equations.
    bool include_first_group = false;
};

struct GridConfig {
    std::vector<int> friend_ks;
    std::vector<int> stranger_ks;
};

struct EvalConfig {
    double holdout = 0.1;
    std::optional<std::uint64_t> seed;
    GridConfig grid;
    /// Optional CSV of deleted friendships (user_id,friend_id).
    std::string deleted_friends;
};

struct PathsConfig {
    std::string network;
    std::string labels;
    std::string continuous_labels;
    std::string output_dir;
};

struct PipelineConfig {
    PathsConfig paths;
    std::uint64_t seed = 1;
    ClusterConfig friend_clustering{ClusterAlgorithm::kmeans, 6, std::nullopt};
    ClusterConfig stranger_clustering{ClusterAlgorithm::agglomerative, 26, std::nullopt};
    BaselineConfig baseline;
    ImpactConfig impact;
    Thresholds thresholds;
    EvalConfig eval;

    std::uint64_t friend_seed() const;
    std::uint64_t stranger_seed() const;
    std::uint64_t eval_seed() const;
};

/// Range checks on every numeric field; throws naming the offending key.
void validate(const PipelineConfig& cfg);

/// Unknown keys are rejected. Relative paths are resolved against `base_dir`
/// when it is non-empty.
PipelineConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::string& path);

/// Parses "2..9" or "8,26,49" into an ascending list.
std::vector<int> parse_k_list(const std::string& text);

} // namespace frisk
