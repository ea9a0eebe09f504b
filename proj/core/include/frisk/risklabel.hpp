#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/cluster.hpp"
#include "frisk/impact.hpp"

namespace frisk {

enum class FriendRisk { not_risky, risky, very_risky };

std::string to_string(FriendRisk r);

/// x and y are fractions: not risky below x, very risky from y up. A y above
/// 1 makes "very risky" unreachable.
struct Thresholds {
    double x = 0.2;
    double y = 0.5;
};

void validate_thresholds(const Thresholds& t);

struct SignShare {
    double im_plus = 0.0;
    double im_minus = 0.0;
    std::size_t n_significant = 0;
};

/// Shares of negative (< 0) and non-negative impacts of one friend cluster
/// over estimable entries in significant stranger-cluster groups. nullopt
/// ("undetermined") when no such entry exists.
std::optional<SignShare> impact_sign_percentages(const ImpactMatrix& m, int friend_cluster);

FriendRisk assign_friend_label(double im_minus, const Thresholds& t = {});

struct ClusterRisk {
    int friend_cluster = 0;
    std::optional<SignShare> share;
    std::optional<FriendRisk> label;  ///< empty when undetermined
};

struct FriendLabel {
    NodeId user;
    NodeId friend_id;
    int friend_cluster = 0;
    std::optional<FriendRisk> label;
};

struct FriendRiskReport {
    Thresholds thresholds;
    std::vector<ClusterRisk> clusters;
    std::vector<FriendLabel> friends;

    const ClusterRisk* cluster(int id) const;
};

/// Labels every friend cluster 1..k of `friend_clusters` and every friend row
/// with its cluster's label.
FriendRiskReport build_friend_report(const ImpactMatrix& m, const ClusterAssignment& friend_clusters,
                                     const Thresholds& t = {});

nlohmann::json report_to_json(const FriendRiskReport& r);
FriendRiskReport report_from_json(const nlohmann::json& doc);
/// Two CSV files: cluster table (friend_cluster,im_plus,im_minus,n_significant,label)
/// and per-friend listing (user_id,friend_id,friend_cluster,label).
void write_report_csv(const std::string& cluster_path, const std::string& friends_path, const FriendRiskReport& r);

} // namespace frisk
