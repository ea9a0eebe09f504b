#include "frisk/impact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"

namespace frisk {

std::string to_string(ImpactMode m) { return m == ImpactMode::single ? "single" : "multiple"; }

ImpactMode impact_mode_from_string(const std::string& s) {
    if (s == "single") return ImpactMode::single;
    if (s == "multiple") return ImpactMode::multiple;
    throw Error("unknown impact mode '" + s + "' (expected single or multiple)");
}

std::string to_string(PsFormula f) {
    return f == PsFormula::frequency_mean ? "frequency_mean" : "exact_match_fraction";
}

PsFormula ps_formula_from_string(const std::string& s) {
    if (s == "frequency_mean") return PsFormula::frequency_mean;
    if (s == "exact_match_fraction") return PsFormula::exact_match_fraction;
    throw Error("unknown ps_formula '" + s + "' (expected frequency_mean or exact_match_fraction)");
}

double profile_similarity(const FrequencyVector& s, const FrequencyVector& x, const std::vector<std::string>& raw_s,
                          const std::vector<std::string>& raw_x, PsFormula formula) {
    if (s.owner != x.owner)
        throw Error("profile_similarity: rows belong to different owners ('" + s.owner + "' vs '" + x.owner + "')");
    const std::size_t n = s.values.size();
    if (x.values.size() != n || raw_s.size() != n || raw_x.size() != n)
        throw Error("profile_similarity: feature width mismatch");
    if (n == 0) return 0.0;
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        if (raw_s[v] == raw_x[v])
            total += 1.0;
        else if (formula == PsFormula::frequency_mean)
            total += std::min(0.5 * (s.values[v] + x.values[v]), 0.999);
    }
    return total / static_cast<double>(n);
}

namespace {

std::vector<std::string> raw_profile(const SocialNetwork& net, const NodeId& id) {
    const NodeIndex i = net.index_of(id);
    std::vector<std::string> out(net.feature_count());
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = net.value(i, f);
    return out;
}

} // namespace

PastCalculator::PastCalculator(const SocialNetwork& net, const Sfm& sfms, const ClusterAssignment& stranger_clusters,
                               std::vector<PeerLabel> peers, PsFormula formula)
    : net_(&net), sfms_(&sfms), sc_(&stranger_clusters), formula_(formula), peers_(std::move(peers)) {
    for (std::size_t i = 0; i < peers_.size(); ++i) {
        const auto& p = peers_[i];
        auto cluster = sc_->find(p.user, p.stranger);
        if (!cluster) continue;
        by_user_cluster_[{p.user, *cluster}].push_back(i);
    }
}

PastValue PastCalculator::operator()(const NodeId& user, const NodeId& stranger) const {
    PastValue out{user, stranger, 0.0, 0};
    const int cluster = sc_->at(user, stranger);
    auto it = by_user_cluster_.find({user, cluster});
    if (it == by_user_cluster_.end()) return out;
    const auto& row_s = sfms_->at(user, stranger);
    const auto raw_s = raw_profile(*net_, stranger);
    double sum = 0.0;
    for (std::size_t idx : it->second) {
        const auto& peer = peers_[idx];
        if (peer.stranger == stranger) continue;
        const double ps = profile_similarity(row_s, sfms_->at(user, peer.stranger), raw_s,
                                             raw_profile(*net_, peer.stranger), formula_);
        sum += ps * (peer.label - peer.baseline);
        ++out.peers;
    }
    if (out.peers > 0) out.value = sum / static_cast<double>(out.peers);
    return out;
}

PastValue past_parameter(const SocialNetwork& net, const Sfm& sfms, const ClusterAssignment& stranger_clusters,
                         const NodeId& user, const NodeId& stranger, const std::vector<PeerLabel>& peers,
                         PsFormula formula) {
    return PastCalculator(net, sfms, stranger_clusters, peers, formula)(user, stranger);
}

ImpactEquation build_equation(const SocialNetwork& net, const LabeledStranger& item,
                              const ClusterAssignment& friend_clusters, const ClusterAssignment& stranger_clusters,
                              ImpactMode mode) {
    auto sc = stranger_clusters.find(item.user, item.stranger);
    if (!sc)
        throw Error("stranger '" + item.stranger + "' of user '" + item.user + "' has no stranger-cluster assignment");
    ImpactEquation eq;
    eq.user = item.user;
    eq.stranger = item.stranger;
    eq.stranger_cluster = *sc;
    eq.response = item.label - item.baseline;
    eq.baseline = item.baseline;
    eq.past = item.past;

    std::map<int, int> multiplicity;
    for (NodeIndex f : mutual_friend_indices(net, net.index_of(item.user), net.index_of(item.stranger))) {
        auto fc = friend_clusters.find(item.user, net.id_of(f));
        if (!fc)
            throw Error("mutual friend '" + net.id_of(f) + "' of (" + item.user + ", " + item.stranger +
                        ") has no friend-cluster assignment");
        ++multiplicity[*fc];
    }
    for (const auto& [cluster, count] : multiplicity)
        eq.coefficients[cluster] = (mode == ImpactMode::multiple ? static_cast<double>(count) : 1.0) * item.past;
    return eq;
}

EquationSet build_equations(const SocialNetwork& net, const std::vector<LabeledStranger>& items,
                            const ClusterAssignment& friend_clusters, const ClusterAssignment& stranger_clusters,
                            ImpactMode mode) {
    EquationSet out;
    for (const auto& item : items) {
        auto eq = build_equation(net, item, friend_clusters, stranger_clusters, mode);
        if (item.past == 0.0) {
            ++out.dropped_zero_past;
            continue;
        }
        out.equations.push_back(std::move(eq));
    }
    return out;
}

std::vector<int> ImpactMatrix::friend_clusters() const {
    std::set<int> ids;
    for (const auto& [key, _] : entries) ids.insert(key.first);
    return {ids.begin(), ids.end()};
}

namespace {

void solve_group(int sc, const std::vector<const ImpactEquation*>& group, ImpactMatrix& out) {
    std::set<int> cols;
    for (const auto* eq : group)
        for (const auto& [fc, coef] : eq->coefficients)
            if (coef != 0.0) cols.insert(fc);
    const std::vector<int> columns(cols.begin(), cols.end());
    const Eigen::Index n = static_cast<Eigen::Index>(group.size());
    const Eigen::Index p = static_cast<Eigen::Index>(columns.size());

    GroupDiagnostics diag;
    diag.n = static_cast<std::size_t>(n);
    diag.p = static_cast<std::size_t>(p);
    if (p == 0) {
        diag.insufficient = true;
        diag.r2 = diag.adjusted_r2 = diag.f_statistic = diag.f_pvalue = std::nan("");
        out.groups[sc] = diag;
        return;
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto* eq = group[static_cast<std::size_t>(i)];
        y(i) = eq->response;
        for (Eigen::Index j = 0; j < p; ++j)
            if (auto it = eq->coefficients.find(columns[static_cast<std::size_t>(j)]); it != eq->coefficients.end())
                a(i, j) = it->second;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double tol = static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon() *
                       (sv.size() ? sv(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    std::size_t rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv(k) > tol) {
            inv(k) = 1.0 / sv(k);
            ++rank;
        }
    const Eigen::VectorXd solution = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * y);

    // e_j lies in the row space iff its projection onto the retained right
    // singular vectors has unit norm.
    const Eigen::MatrixXd& v = svd.matrixV();
    for (Eigen::Index j = 0; j < p; ++j) {
        double in_row_space = 0.0;
        for (Eigen::Index k = 0; k < sv.size(); ++k)
            if (sv(k) > tol) in_row_space += v(j, k) * v(j, k);
        out.entries[{columns[static_cast<std::size_t>(j)], sc}] = {solution(j), in_row_space > 1.0 - 1e-8};
    }

    const Eigen::VectorXd residual = y - a * solution;
    diag.rank = rank;
    diag.sse = residual.squaredNorm();
    const double sst = y.squaredNorm();
    diag.r2 = sst > 0.0 ? 1.0 - diag.sse / sst : (diag.sse == 0.0 ? 1.0 : 0.0);
    diag.insufficient = n <= p;
    const double nd = static_cast<double>(n);
    const double rd = static_cast<double>(rank);
    if (diag.insufficient || n - static_cast<Eigen::Index>(rank) < 1) {
        diag.adjusted_r2 = diag.f_statistic = diag.f_pvalue = std::nan("");
        diag.significant = false;
    } else {
        const double dof = nd - rd;
        diag.adjusted_r2 = dof - 1.0 > 0.0 ? 1.0 - (1.0 - diag.r2) * (nd - 1.0) / (nd - rd - 1.0) : std::nan("");
        if (diag.sse <= 1e-30 * std::max(sst, 1e-300)) {
            diag.f_statistic = std::numeric_limits<double>::infinity();
            diag.f_pvalue = 0.0;
        } else {
            diag.f_statistic = ((sst - diag.sse) / rd) / (diag.sse / dof);
            boost::math::fisher_f dist(rd, dof);
            diag.f_pvalue = diag.f_statistic > 0.0 ? boost::math::cdf(boost::math::complement(dist, diag.f_statistic))
                                                   : 1.0;
        }
        diag.significant = diag.f_pvalue < 0.05;
    }
    out.groups[sc] = diag;
}

} // namespace

ImpactMatrix solve_impacts(const EquationSet& equations, ImpactMode mode) {
    ImpactMatrix out;
    out.mode = mode;
    out.dropped_zero_past = equations.dropped_zero_past;
    std::map<int, std::vector<const ImpactEquation*>> groups;
    for (const auto& eq : equations.equations) groups[eq.stranger_cluster].push_back(&eq);
    for (const auto& [sc, group] : groups) solve_group(sc, group, out);
    return out;
}

double predict_label(const ImpactMatrix& m, const ImpactEquation& eq) {
    double value = eq.baseline;
    for (const auto& [fc, coef] : eq.coefficients)
        if (auto it = m.entries.find({fc, eq.stranger_cluster}); it != m.entries.end()) value += coef * it->second.value;
    return value;
}

void write_impacts_csv(const std::string& path, const ImpactMatrix& m) {
    std::ostringstream os;
    csv::write_row(os, {"friend_cluster", "stranger_cluster", "value", "estimable", "adjusted_r2", "f_pvalue", "n"});
    for (const auto& [key, entry] : m.entries) {
        const auto& g = m.groups.at(key.second);
        csv::write_row(os, {std::to_string(key.first), std::to_string(key.second), csv::format_real(entry.value),
                            entry.estimable ? "true" : "false", csv::format_real(g.adjusted_r2),
                            csv::format_real(g.f_pvalue), std::to_string(g.n)});
    }
    io::write_text(path, os.str());
}

ImpactMatrix read_impacts_csv(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path + ":1", "missing header");
    csv::expect_header(rows.front(),
                       {"friend_cluster", "stranger_cluster", "value", "estimable", "adjusted_r2", "f_pvalue", "n"},
                       path);
    ImpactMatrix m;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string locus = path + ":" + std::to_string(rows[r].line);
        const auto& f = rows[r].fields;
        if (f.size() != 7) throw ParseError(locus, "expected 7 fields");
        if (f[3] != "true" && f[3] != "false") throw ParseError(locus, "estimable must be true or false");
        const int fc = static_cast<int>(csv::parse_int(f[0], locus));
        const int sc = static_cast<int>(csv::parse_int(f[1], locus));
        m.entries[{fc, sc}] = {csv::parse_real(f[2], locus), f[3] == "true"};
        GroupDiagnostics g;
        g.adjusted_r2 = csv::parse_real(f[4], locus);
        g.f_pvalue = csv::parse_real(f[5], locus);
        g.n = static_cast<std::size_t>(csv::parse_int(f[6], locus));
        g.insufficient = std::isnan(g.f_pvalue);
        g.significant = !g.insufficient && g.f_pvalue < 0.05;
        m.groups[sc] = g;
    }
    return m;
}

} // namespace frisk
