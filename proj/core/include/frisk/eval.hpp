#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/baseline.hpp"
#include "frisk/config.hpp"
#include "frisk/risklabel.hpp"
#include "frisk/stages.hpp"

namespace frisk {

/// Multinomial fit over the full labeled dataset with the raw mutual-friend
/// count appended as a numeric column.
struct AssumptionFit {
    MultinomialModel model;
    std::vector<SignificanceRow> rows;
};

AssumptionFit validate_assumption(const LabeledDataset& data, const Sfm& sfms, const BaselineConfig& cfg);
AssumptionFit validate_assumption(const LabeledDataset& data, const BaselineConfig& cfg);

struct Prediction {
    NodeId user;
    NodeId stranger;
    int stranger_cluster = 0;
    double actual = 0.0;
    double predicted = 0.0;
};

struct CrossValidation {
    int friend_k = 0;
    int stranger_k = 0;
    std::uint64_t seed = 0;
    double holdout = 0.0;
    std::size_t validation_points = 0;
    std::size_t training_equations = 0;
    /// Root mean squared (L - predicted L); NaN when there are no validation
    /// points.
    double rmse = 0.0;
    std::map<int, double> adjusted_r2;  ///< stranger clusters with enough equations
    double mean_adjusted_r2 = 0.0;      ///< NaN when adjusted_r2 is empty
    double median_cluster_size = 0.0;   ///< stranger clusters, all labeled strangers
    std::size_t significant_clusters = 0;
    std::size_t stranger_clusters = 0;
    std::vector<Prediction> predictions;

    bool has_validation_points() const noexcept { return validation_points > 0; }
};

/// Stratified hold-out: within each stranger cluster holding at least 10
/// eligible records, ceil(holdout * size) of them are drawn with `seed`.
std::set<RecordKey> holdout_split(const std::vector<RecordKey>& eligible, const ClusterAssignment& stranger_clusters,
                                  double holdout, std::uint64_t seed);

CrossValidation cross_validate(const LabeledDataset& data, const PipelineConfig& cfg, double holdout,
                               std::uint64_t seed, const StageOverrides& overrides = {});

/// RMSE of the in-sample fit over every eligible record.
double in_sample_rmse(const LabeledDataset& data, const PipelineConfig& cfg, const StageOverrides& overrides = {});

struct GridCell {
    int friend_k = 0;
    int stranger_k = 0;
    std::uint64_t seed = 0;
    std::optional<CrossValidation> result;
    std::string error;  ///< set when the cell failed
};

/// Configuration of one grid cell: both k values replaced and the master
/// seed derived from (master, friend_k, stranger_k).
PipelineConfig grid_cell_config(const PipelineConfig& base, int friend_k, int stranger_k, std::uint64_t master);

std::vector<GridCell> grid_search(const LabeledDataset& data, const std::vector<int>& friend_ks,
                                  const std::vector<int>& stranger_ks, const PipelineConfig& cfg,
                                  std::uint64_t master, const StageOverrides& overrides = {});

/// Cell with the largest mean adjusted R2; values within 1e-9 of the maximum
/// count as ties and go to the smallest (friend_k, stranger_k).
const GridCell* best_cell(const std::vector<GridCell>& grid);

struct DeletionCheck {
    std::size_t total = 0;
    std::size_t hits = 0;
    double fraction = 0.0;
    std::size_t skipped = 0;  ///< pairs that are not known friend rows
};

DeletionCheck validate_deletions(const FriendRiskReport& report, const std::vector<RecordKey>& deleted);

/// CSV user_id,friend_id.
std::vector<RecordKey> read_deleted_friends(const std::string& path);

struct EvaluationReport {
    std::optional<CrossValidation> holdout;
    std::vector<GridCell> grid;
    std::optional<AssumptionFit> assumption;
    std::optional<DeletionCheck> deletions;
};

nlohmann::json cross_validation_to_json(const CrossValidation& cv);
nlohmann::json evaluation_to_json(const EvaluationReport& r);
/// Grid table: friend_k,stranger_k,mean_adjusted_r2,median_cluster_size,
/// validation_points,rmse,significant_clusters,stranger_clusters,error.
void write_grid_csv(const std::string& path, const std::vector<GridCell>& grid);
/// Fixed-width text rendering of the grid table.
std::string format_grid_table(const std::vector<GridCell>& grid);

} // namespace frisk
