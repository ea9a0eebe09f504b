#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/baseline.hpp"
#include "frisk/cluster.hpp"
#include "frisk/impact.hpp"
#include "frisk/network.hpp"

namespace frisk {

enum class LabelRounding { continuous, discrete };

std::string to_string(LabelRounding r);
LabelRounding label_rounding_from_string(const std::string& s);

/// Every user owns a private ego network: its friends are generated for it
/// and every stranger is attached to between 1 and max_mutual_friends of
/// those friends. Friend and stranger types are feature masks: on masked
/// features a node copies the user's value with probability min(1, 2h),
/// elsewhere with probability max(0, 2h - 1), with h the homophily; values
/// not copied are drawn uniformly. Masks cover half the categorical
/// features, so the mean copy probability is h.
struct SynthConfig {
    int n_users = 20;
    int friends_min = 30;
    int friends_max = 50;
    int strangers_per_user = 100;
    int n_features = 10;             ///< categorical features
    int categories_per_feature = 8;
    int n_visibility_features = 1;
    double visible_probability = 0.7;
    double homophily = 0.5;
    int n_friend_clusters_true = 6;
    int n_stranger_clusters_true = 26;
    double impact_scale = 0.5;       ///< planted impacts are uniform in [-scale, scale]
    double label_noise_sigma = 0.0;
    LabelRounding rounding = LabelRounding::continuous;
    /// Share of strangers with exactly one mutual friend.
    double first_group_fraction = 0.3;
    int max_mutual_friends = 4;
    /// First-group labels deviate from the baseline by +-taste, the sign
    /// drawn per (user, stranger type).
    double taste = 0.6;
    /// Spread of the planted baseline coefficients.
    double baseline_scale = 0.3;
    ImpactMode mode = ImpactMode::single;
    PsFormula ps_formula = PsFormula::frequency_mean;
    std::uint64_t seed = 1;
};

void validate(const SynthConfig& cfg);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& doc);

/// Ground truth behind a generated dataset.
struct PlantedTruth {
    ImpactMode mode = ImpactMode::single;
    PsFormula ps_formula = PsFormula::frequency_mean;
    std::map<ImpactKey, double> impacts;  ///< I*(friend type, stranger type)
    MultinomialModel baseline;            ///< planted baseline over the default design
    ClusterAssignment friend_clusters;    ///< (user, friend) -> type
    ClusterAssignment stranger_clusters;  ///< (user, stranger) -> type
    std::map<std::pair<NodeId, int>, double> taste;  ///< (user, stranger type) -> deviation
};

struct SynthWorld {
    SocialNetwork net;
    PlantedTruth truth;
    std::vector<RecordKey> labeled;  ///< every (user, stranger) pair, sorted
};

SynthWorld generate_world(const SynthConfig& cfg);
/// Same network as generate_world(cfg).net.
SocialNetwork generate_network(const SynthConfig& cfg);

struct SynthLabels {
    std::vector<RiskLabelRecord> records;
    std::map<RecordKey, double> continuous;  ///< empty in discrete mode
    std::map<RecordKey, double> baseline;    ///< b*
    std::map<RecordKey, double> past;        ///< Past* (0 for the first group)
    std::map<RecordKey, double> noise;       ///< Gaussian draw added to each label
    std::size_t clamped = 0;                 ///< labels moved into [1, 3]
};

/// Generative form of the estimated-label equation:
///   b + sum over friend clusters of I * (1 or multiplicity) * past.
double planted_label(double baseline, double past, const std::map<int, int>& multiplicity,
                     const std::map<int, double>& impacts, ImpactMode mode);

/// Two passes. First-group strangers get b* + taste + noise. Past* is then
/// computed from those labels with the pipeline's own Past formula, and every
/// other stranger gets planted_label(b*, Past*, ...) + noise.
SynthLabels generate_labels(const SocialNetwork& net, const PlantedTruth& truth,
                            const std::vector<RecordKey>& labeled, const SynthConfig& cfg);

/// World plus labels as a dataset (continuous labels attached in
/// continuous mode).
struct SynthDataset {
    LabeledDataset data;
    PlantedTruth truth;
    SynthLabels labels;
};
SynthDataset generate(const SynthConfig& cfg);

struct RecoveryEntry {
    int friend_cluster = 0;
    int stranger_cluster = 0;
    double truth = 0.0;
    double estimate = 0.0;
    double error = 0.0;  ///< |estimate - truth|
};

struct RecoveryError {
    double sup_norm = 0.0;
    double rmse = 0.0;
    std::vector<RecoveryEntry> entries;
};

/// Errors over estimable entries. Rejects estimated cluster ids outside the
/// truth's index space.
RecoveryError recovery_error(const PlantedTruth& truth, const ImpactMatrix& estimated);

nlohmann::json truth_to_json(const PlantedTruth& truth);
PlantedTruth truth_from_json(const nlohmann::json& doc);

} // namespace frisk
