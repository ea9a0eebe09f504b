#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "frisk/network.hpp"
#include "frisk/transform.hpp"

namespace frisk {

/// Which explanatory columns describe a labeled stranger.
///
/// Column names: "freq:<feature>" for stranger frequency entries,
/// "visible:<feature>" for 0/1 visibility indicators, "mutual_friends" for
/// the raw mutual-friend count.
struct DesignOptions {
    bool frequencies = true;
    bool visibility_indicators = true;
    bool mutual_friend_count = false;
    /// When non-empty, only these columns (in this order) are kept.
    std::vector<std::string> columns;
};

struct Design {
    std::vector<std::string> columns;
    std::vector<RecordKey> keys;
    Eigen::MatrixXd x;  ///< one row per key
};

/// Rows follow `records` order. Every record needs a row in `sfms`.
Design build_design(const SocialNetwork& net, const Sfm& sfms,
                    const std::vector<RiskLabelRecord>& records, const DesignOptions& opts);

struct FitOptions {
    double ridge = 1e-4;
    int max_iter = 100;
    int reference_label = 2;
};

/// Multinomial logit over labels {1,2,3} with one reference label whose
/// linear predictor is pinned at zero.
///
/// params row r holds class `classes[r]`; column 0 is the intercept, column
/// j + 1 the coefficient of feature_names[j]. std_errors has the same shape
/// and is NaN where a parameter is not estimable.
struct MultinomialModel {
    static constexpr int kFormatVersion = 1;

    int reference_label = 2;
    std::array<int, 2> classes{1, 3};
    std::vector<std::string> feature_names;
    Eigen::MatrixXd params;
    Eigen::MatrixXd std_errors;
    double ridge = 0.0;
    bool converged = false;
    int iterations = 0;
    double log_likelihood = 0.0;
    double gradient_sup_norm = 0.0;
    std::size_t n_obs = 0;
    std::vector<std::string> warnings;
    /// Penalized log-likelihood at the start and after each accepted step.
    std::vector<double> trace;

    std::size_t width() const noexcept { return feature_names.size(); }
    double intercept(int label) const;
    Eigen::VectorXd coefficients(int label) const;
};

/// Penalized Newton-Raphson with step halving. Maximizes
///   sum_i log p(y_i | x_i) - ridge/2 * ||params||^2
/// Rejects fewer than two distinct labels when ridge == 0 (no finite MLE).
MultinomialModel fit_multinomial(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 std::vector<std::string> feature_names, const FitOptions& opts = {});

/// Penalized log-likelihood and its analytic gradient at `params`.
struct Objective {
    double value = 0.0;
    Eigen::VectorXd gradient;  ///< stacked [class0 params; class1 params]
};
Objective multinomial_objective(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                const Eigen::MatrixXd& params, int reference_label, double ridge);

using Probabilities = std::array<double, 3>;  ///< p1, p2, p3

Probabilities predict_probs(const MultinomialModel& model, std::span<const double> row);
Probabilities predict_probs(const MultinomialModel& model, const Eigen::VectorXd& row);

struct BaselineLabel {
    NodeId user;
    NodeId stranger;
    double value = 0.0;
    Probabilities probs{};
};

/// 1*p1 + 2*p2 + 3*p3.
double expected_label(const Probabilities& p);
BaselineLabel baseline_label(const MultinomialModel& model, const Eigen::VectorXd& row,
                             const NodeId& user = {}, const NodeId& stranger = {});
std::vector<BaselineLabel> baseline_labels(const MultinomialModel& model, const Design& design);

struct SignificanceRow {
    std::string parameter;
    int label = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p_value = 0.0;
    bool estimable = true;
    bool significant = false;  ///< p < 0.05
};

/// Two-sided Wald tests from the inverse observed information at the
/// optimum. Requires a converged model.
std::vector<SignificanceRow> coefficient_significance(const MultinomialModel& model);

/// Regression table: one line per parameter with estimates per non-reference
/// label and standard errors in parentheses beneath.
std::string format_significance_table(const MultinomialModel& model, const std::vector<SignificanceRow>& rows);
void write_significance_csv(const std::string& path, const std::vector<SignificanceRow>& rows);

nlohmann::json model_to_json(const MultinomialModel& model);
MultinomialModel model_from_json(const nlohmann::json& doc);
void save_model(const std::string& path, const MultinomialModel& model);
MultinomialModel load_model(const std::string& path);

/// Refuses a model whose feature names differ from `columns`.
void check_model_columns(const MultinomialModel& model, const std::vector<std::string>& columns);

/// CSV: user_id,stranger_id,p1,p2,p3,baseline.
void write_baselines_csv(const std::string& path, const std::vector<BaselineLabel>& labels);
std::vector<BaselineLabel> read_baselines_csv(const std::string& path);

} // namespace frisk
