#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "frisk/cluster.hpp"
#include "frisk/network.hpp"
#include "frisk/transform.hpp"

namespace frisk {

enum class ImpactMode { single, multiple };
enum class PsFormula { frequency_mean, exact_match_fraction };

std::string to_string(ImpactMode m);
ImpactMode impact_mode_from_string(const std::string& s);
std::string to_string(PsFormula f);
PsFormula ps_formula_from_string(const std::string& s);

/// Similarity of two strangers of the same owner, in [0, 1].
///
/// frequency_mean: mean over features of 1 when the raw values agree, else
/// the average of the two frequencies capped at 0.999, so only identical
/// profiles reach 1. exact_match_fraction: share of agreeing features.
double profile_similarity(const FrequencyVector& s, const FrequencyVector& x,
                          const std::vector<std::string>& raw_s, const std::vector<std::string>& raw_x,
                          PsFormula formula = PsFormula::frequency_mean);

/// A past label from the first group: user label l and baseline b.
struct PeerLabel {
    NodeId user;
    NodeId stranger;
    double label = 0.0;
    double baseline = 0.0;
};

struct PastValue {
    NodeId user;
    NodeId stranger;
    double value = 0.0;
    std::size_t peers = 0;  ///< number of peers averaged
};

/// Averages PS(s,x) * (l_ux - b_ux) over peers x != s labeled by the same
/// user and sharing the stranger cluster of s. Zero when no peer qualifies.
class PastCalculator {
public:
    PastCalculator(const SocialNetwork& net, const Sfm& sfms, const ClusterAssignment& stranger_clusters,
                   std::vector<PeerLabel> peers, PsFormula formula = PsFormula::frequency_mean);

    PastValue operator()(const NodeId& user, const NodeId& stranger) const;

private:
    const SocialNetwork* net_;
    const Sfm* sfms_;
    const ClusterAssignment* sc_;
    PsFormula formula_;
    std::vector<PeerLabel> peers_;
    std::map<std::pair<NodeId, int>, std::vector<std::size_t>> by_user_cluster_;
};

PastValue past_parameter(const SocialNetwork& net, const Sfm& sfms, const ClusterAssignment& stranger_clusters,
                         const NodeId& user, const NodeId& stranger, const std::vector<PeerLabel>& peers,
                         PsFormula formula = PsFormula::frequency_mean);

/// Inputs for one labeled stranger.
struct LabeledStranger {
    NodeId user;
    NodeId stranger;
    double label = 0.0;
    double baseline = 0.0;
    double past = 0.0;
};

/// label - baseline = sum_i coefficients[i] * I[i, stranger_cluster]
struct ImpactEquation {
    NodeId user;
    NodeId stranger;
    int stranger_cluster = 0;
    double response = 0.0;
    double baseline = 0.0;
    double past = 0.0;
    std::map<int, double> coefficients;  ///< friend cluster -> multiplier * Past
};

/// Equation for one stranger, kept even when Past is zero.
ImpactEquation build_equation(const SocialNetwork& net, const LabeledStranger& item,
                              const ClusterAssignment& friend_clusters, const ClusterAssignment& stranger_clusters,
                              ImpactMode mode);

struct EquationSet {
    std::vector<ImpactEquation> equations;
    std::size_t dropped_zero_past = 0;
};

/// One equation per item; items whose Past is zero carry no information on
/// impacts and are dropped (counted in dropped_zero_past).
EquationSet build_equations(const SocialNetwork& net, const std::vector<LabeledStranger>& items,
                            const ClusterAssignment& friend_clusters, const ClusterAssignment& stranger_clusters,
                            ImpactMode mode);

struct ImpactEntry {
    double value = 0.0;
    bool estimable = true;
};

/// Fit diagnostics of one stranger cluster's regression (no intercept).
/// r2 is uncentered (1 - SSE / sum y^2); adjusted_r2 and the F-test use the
/// design rank as parameter count and n - rank residual degrees of freedom.
struct GroupDiagnostics {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t rank = 0;
    double sse = 0.0;
    double r2 = 0.0;
    double adjusted_r2 = 0.0;
    double f_statistic = 0.0;
    double f_pvalue = 1.0;
    bool insufficient = false;  ///< n <= p: diagnostics are not meaningful
    bool significant = false;   ///< f_pvalue < 0.05
};

using ImpactKey = std::pair<int, int>;  ///< (friend cluster, stranger cluster)

struct ImpactMatrix {
    ImpactMode mode = ImpactMode::single;
    std::map<ImpactKey, ImpactEntry> entries;
    std::map<int, GroupDiagnostics> groups;
    std::size_t dropped_zero_past = 0;

    std::vector<int> friend_clusters() const;
};

/// Minimum-norm least squares per stranger cluster.
ImpactMatrix solve_impacts(const EquationSet& equations, ImpactMode mode = ImpactMode::single);

/// baseline + sum of coefficient * impact; absent entries contribute zero.
double predict_label(const ImpactMatrix& m, const ImpactEquation& eq);

/// CSV: friend_cluster,stranger_cluster,value,estimable,adjusted_r2,f_pvalue,n
void write_impacts_csv(const std::string& path, const ImpactMatrix& m);
ImpactMatrix read_impacts_csv(const std::string& path);

} // namespace frisk
