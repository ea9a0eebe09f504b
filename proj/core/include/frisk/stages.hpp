#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "frisk/baseline.hpp"
#include "frisk/cluster.hpp"
#include "frisk/config.hpp"
#include "frisk/error.hpp"
#include "frisk/impact.hpp"
#include "frisk/network.hpp"
#include "frisk/risklabel.hpp"
#include "frisk/transform.hpp"

namespace frisk {

/// Replacements for fitted stages, used to run with known clusters or a
/// known baseline model (oracle mode).
struct StageOverrides {
    std::optional<ClusterAssignment> friend_clusters;
    std::optional<ClusterAssignment> stranger_clusters;
    std::optional<MultinomialModel> baseline;
};

/// Error raised inside a stage; carries the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct StageResults {
    Sfm sfmf;
    Sfm sfms;
    ClusterAssignment friend_clusters;
    ClusterAssignment stranger_clusters;
    std::set<RecordKey> first_group;
    Design design;  ///< every record, record order
    MultinomialModel model;
    std::vector<BaselineLabel> baselines;  ///< every record, record order
    std::vector<LabeledStranger> items;    ///< every record with its Past
    EquationSet equations;
    ImpactMatrix impacts;
    FriendRiskReport report;
};

/// Owners of friend rows: every user that labeled at least one stranger.
std::set<NodeId> labeling_users(const std::vector<RiskLabelRecord>& records);

/// Transformation, clustering, baseline, Past, impacts and friend labels in
/// sequence. Records in `excluded` are kept out of baseline training, Past
/// peers and impact equations (their baselines and Past are still computed).
/// `after_stage` runs after each stage with its name; an exception thrown
/// from it is reported as a failure of that stage.
using StageCallback = std::function<void(const std::string& stage, const StageResults& partial)>;
StageResults run_stages(const LabeledDataset& data, const PipelineConfig& cfg, const StageOverrides& overrides = {},
                        const std::set<RecordKey>& excluded = {}, const StageCallback& after_stage = {});

/// Every record with its response label, baseline and Past. Peers are the
/// first-group records not in `excluded`; `baselines` follows record order.
std::vector<LabeledStranger> labeled_strangers(const LabeledDataset& data, const Sfm& sfms,
                                               const ClusterAssignment& stranger_clusters,
                                               const std::vector<BaselineLabel>& baselines,
                                               const std::set<RecordKey>& first_group, PsFormula formula,
                                               const std::set<RecordKey>& excluded = {});

/// Whether a record takes part in the impact regression under `cfg`.
bool impact_eligible(const std::set<RecordKey>& first_group, const RecordKey& key, const PipelineConfig& cfg);

} // namespace frisk
