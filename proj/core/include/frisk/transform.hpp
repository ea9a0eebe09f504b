#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frisk/network.hpp"

namespace frisk {

enum class SfmKind { friends, strangers };

std::string to_string(SfmKind kind);
SfmKind sfm_kind_from_string(const std::string& s);

/// Profile of `subject` re-expressed as, per feature, the fraction of the
/// owner's friends holding the same value.
struct FrequencyVector {
    NodeId owner;
    NodeId subject;
    std::vector<double> values;
};

/// Social frequency matrix: one row per (owner, subject) pair, rows sorted
/// by that key. Entries are validated to lie in [0, 1].
class Sfm {
public:
    Sfm() = default;
    Sfm(SfmKind kind, std::vector<std::string> features, std::vector<FrequencyVector> rows);

    SfmKind kind() const noexcept { return kind_; }
    const std::vector<std::string>& features() const noexcept { return features_; }
    const std::vector<FrequencyVector>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }

    std::optional<std::size_t> find(const NodeId& owner, const NodeId& subject) const;
    const FrequencyVector& at(const NodeId& owner, const NodeId& subject) const;

    /// Dense row-major copy, rows in sfm order.
    Eigen::MatrixXd matrix() const;

    /// Sub-matrix restricted to the given keys (order of `keys` kept).
    Sfm subset(const std::vector<RecordKey>& keys) const;

private:
    SfmKind kind_ = SfmKind::friends;
    std::vector<std::string> features_;
    std::vector<FrequencyVector> rows_;
    std::map<RecordKey, std::size_t> index_;
};

/// |{g in F_u : g[feature] == value}| / |F_u|. Throws for friendless u.
double feature_frequency(const SocialNetwork& net, std::string_view owner,
                         std::string_view feature, std::string_view value);

/// One row per (owner, friend) for each listed owner.
Sfm build_sfmf(const SocialNetwork& net, const std::set<NodeId>& owners);

/// One row per labeled (user, stranger); frequencies are still taken over
/// the user's friends.
Sfm build_sfms(const SocialNetwork& net, const std::vector<RiskLabelRecord>& records);

/// CSV: owner_id,subject_id,<feature...>, values with nine decimals.
void write_sfm_csv(const std::string& path, const Sfm& sfm);
Sfm read_sfm_csv(const std::string& path, SfmKind kind);

} // namespace frisk
