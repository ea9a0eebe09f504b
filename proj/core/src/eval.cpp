#include "frisk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/log.hpp"
#include "frisk/random.hpp"

namespace frisk {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

AssumptionFit validate_assumption(const LabeledDataset& data, const Sfm& sfms, const BaselineConfig& cfg) {
    DesignOptions opts = cfg.design;
    opts.mutual_friend_count = true;
    if (!opts.columns.empty() &&
        std::find(opts.columns.begin(), opts.columns.end(), "mutual_friends") == opts.columns.end())
        opts.columns.push_back("mutual_friends");
    const Design design = build_design(data.net, sfms, data.records, opts);
    std::vector<int> labels;
    labels.reserve(data.records.size());
    for (const auto& r : data.records) labels.push_back(r.label);
    AssumptionFit out;
    out.model = fit_multinomial(design.x, labels, design.columns, {cfg.ridge, cfg.max_iter, cfg.reference_label});
    out.rows = coefficient_significance(out.model);
    return out;
}

AssumptionFit validate_assumption(const LabeledDataset& data, const BaselineConfig& cfg) {
    validate_records(data.net, data.records);
    return validate_assumption(data, build_sfms(data.net, data.records), cfg);
}

std::set<RecordKey> holdout_split(const std::vector<RecordKey>& eligible, const ClusterAssignment& stranger_clusters,
                                  double holdout, std::uint64_t seed) {
    if (!(holdout > 0.0 && holdout < 1.0)) throw Error("holdout must lie in (0, 1)");
    std::map<int, std::vector<RecordKey>> by_cluster;
    for (const auto& key : eligible) by_cluster[stranger_clusters.at(key.first, key.second)].push_back(key);
    std::set<RecordKey> out;
    for (auto& [cluster, keys] : by_cluster) {
        if (keys.size() < 10) continue;
        std::sort(keys.begin(), keys.end());
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cluster)));
        const auto take = static_cast<std::size_t>(std::ceil(holdout * static_cast<double>(keys.size())));
        // partial Fisher-Yates: the first `take` slots become the sample
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + uniform_index(rng, keys.size() - i);
            std::swap(keys[i], keys[j]);
            out.insert(keys[i]);
        }
    }
    return out;
}

CrossValidation cross_validate(const LabeledDataset& data, const PipelineConfig& cfg, double holdout,
                               std::uint64_t seed, const StageOverrides& overrides) {
    CrossValidation cv;
    cv.friend_k = cfg.friend_clustering.k;
    cv.stranger_k = cfg.stranger_clustering.k;
    cv.seed = seed;
    cv.holdout = holdout;

    // Clusters and first-group membership do not depend on labels, so a first
    // pass with nothing excluded fixes the eligible set and its strata.
    StageOverrides fixed = overrides;
    StageResults full = run_stages(data, cfg, overrides);
    fixed.friend_clusters = full.friend_clusters;
    fixed.stranger_clusters = full.stranger_clusters;
    std::vector<RecordKey> eligible;
    for (const auto& rec : data.records) {
        RecordKey key{rec.user, rec.stranger};
        if (impact_eligible(full.first_group, key, cfg)) eligible.push_back(std::move(key));
    }
    const auto test = holdout_split(eligible, full.stranger_clusters, holdout, seed);
    const StageResults fit = test.empty() ? std::move(full) : run_stages(data, cfg, fixed, test);

    cv.training_equations = fit.equations.equations.size();
    double ss = 0.0;
    for (const auto& item : fit.items) {
        if (!test.count({item.user, item.stranger})) continue;
        const ImpactEquation eq =
            build_equation(data.net, item, fit.friend_clusters, fit.stranger_clusters, cfg.impact.mode);
        const double predicted = predict_label(fit.impacts, eq);
        cv.predictions.push_back({item.user, item.stranger, eq.stranger_cluster, item.label, predicted});
        ss += (item.label - predicted) * (item.label - predicted);
    }
    cv.validation_points = cv.predictions.size();
    if (cv.validation_points == 0) {
        log::warn("cross-validation: no validation points");
        cv.rmse = kNaN;
    } else {
        cv.rmse = std::sqrt(ss / static_cast<double>(cv.validation_points));
    }

    double sum = 0.0;
    for (const auto& [sc, g] : fit.impacts.groups) {
        if (g.significant) ++cv.significant_clusters;
        if (g.insufficient || !std::isfinite(g.adjusted_r2)) continue;
        cv.adjusted_r2[sc] = g.adjusted_r2;
        sum += g.adjusted_r2;
    }
    cv.mean_adjusted_r2 = cv.adjusted_r2.empty() ? kNaN : sum / static_cast<double>(cv.adjusted_r2.size());
    const auto sizes = fit.stranger_clusters.sizes();
    cv.stranger_clusters = sizes.size();
    cv.median_cluster_size = median({sizes.begin(), sizes.end()});
    return cv;
}

double in_sample_rmse(const LabeledDataset& data, const PipelineConfig& cfg, const StageOverrides& overrides) {
    const StageResults fit = run_stages(data, cfg, overrides);
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& item : fit.items) {
        if (!impact_eligible(fit.first_group, {item.user, item.stranger}, cfg)) continue;
        const auto eq = build_equation(data.net, item, fit.friend_clusters, fit.stranger_clusters, cfg.impact.mode);
        const double d = item.label - predict_label(fit.impacts, eq);
        ss += d * d;
        ++n;
    }
    return n == 0 ? kNaN : std::sqrt(ss / static_cast<double>(n));
}

PipelineConfig grid_cell_config(const PipelineConfig& base, int friend_k, int stranger_k, std::uint64_t master) {
    PipelineConfig cfg = base;
    cfg.friend_clustering.k = friend_k;
    cfg.stranger_clustering.k = stranger_k;
    cfg.friend_clustering.seed.reset();
    cfg.stranger_clustering.seed.reset();
    cfg.seed = derive_seed(master, static_cast<std::uint64_t>(friend_k), static_cast<std::uint64_t>(stranger_k));
    cfg.eval.seed.reset();
    return cfg;
}

std::vector<GridCell> grid_search(const LabeledDataset& data, const std::vector<int>& friend_ks,
                                  const std::vector<int>& stranger_ks, const PipelineConfig& cfg,
                                  std::uint64_t master, const StageOverrides& overrides) {
    if (friend_ks.empty() || stranger_ks.empty()) throw Error("grid search needs non-empty k lists");
    std::vector<GridCell> out;
    for (int fk : friend_ks) {
        for (int sk : stranger_ks) {
            GridCell cell;
            cell.friend_k = fk;
            cell.stranger_k = sk;
            const PipelineConfig cell_cfg = grid_cell_config(cfg, fk, sk, master);
            cell.seed = cell_cfg.seed;
            try {
                cell.result = cross_validate(data, cell_cfg, cell_cfg.eval.holdout, cell_cfg.eval_seed(), overrides);
            } catch (const std::exception& e) {
                cell.error = e.what();
                log::warn(fmt::format("grid cell ({}, {}) failed: {}", fk, sk, e.what()));
            }
            out.push_back(std::move(cell));
        }
    }
    return out;
}

const GridCell* best_cell(const std::vector<GridCell>& grid) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : grid)
        if (c.result && std::isfinite(c.result->mean_adjusted_r2)) best = std::max(best, c.result->mean_adjusted_r2);
    if (!std::isfinite(best)) return nullptr;
    const GridCell* pick = nullptr;
    for (const auto& c : grid) {
        if (!c.result || !(c.result->mean_adjusted_r2 >= best - 1e-9)) continue;
        if (!pick || std::pair(c.friend_k, c.stranger_k) < std::pair(pick->friend_k, pick->stranger_k)) pick = &c;
    }
    return pick;
}

DeletionCheck validate_deletions(const FriendRiskReport& report, const std::vector<RecordKey>& deleted) {
    std::map<RecordKey, const FriendLabel*> index;
    for (const auto& f : report.friends) index[{f.user, f.friend_id}] = &f;
    DeletionCheck out;
    for (const auto& key : deleted) {
        auto it = index.find(key);
        if (it == index.end()) {
            ++out.skipped;
            log::warn("deleted friend '" + key.second + "' of user '" + key.first + "' is not a known friend; skipped");
            continue;
        }
        ++out.total;
        if (it->second->label == FriendRisk::very_risky) ++out.hits;
    }
    out.fraction = out.total == 0 ? 0.0 : static_cast<double>(out.hits) / static_cast<double>(out.total);
    return out;
}

std::vector<RecordKey> read_deleted_friends(const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path, "empty file");
    csv::expect_header(rows.front(), {"user_id", "friend_id"}, path);
    std::vector<RecordKey> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.fields.size() != 2)
            throw ParseError(path + ":" + std::to_string(row.line), "expected 2 fields");
        out.emplace_back(row.fields[0], row.fields[1]);
    }
    return out;
}

json cross_validation_to_json(const CrossValidation& cv) {
    json r2 = json::object();
    for (const auto& [sc, v] : cv.adjusted_r2) r2[std::to_string(sc)] = real(v);
    json out{{"friend_k", cv.friend_k},
             {"stranger_k", cv.stranger_k},
             {"seed", cv.seed},
             {"holdout", cv.holdout},
             {"mean_adjusted_r2", real(cv.mean_adjusted_r2)},
             {"median_cluster_size", real(cv.median_cluster_size)},
             {"validation_points", cv.validation_points},
             {"rmse", real(cv.rmse)},
             {"training_equations", cv.training_equations},
             {"significant_clusters", cv.significant_clusters},
             {"stranger_clusters", cv.stranger_clusters},
             {"adjusted_r2", std::move(r2)}};
    if (!cv.has_validation_points()) out["note"] = "no validation points";
    return out;
}

json evaluation_to_json(const EvaluationReport& r) {
    json out{{"format", "frisk.evaluation_report"},
             {"format_version", 1},
             {"f_test_residual_dof", "n - rank(design)"}};
    if (r.holdout) out["holdout"] = cross_validation_to_json(*r.holdout);
    json grid = json::array();
    for (const auto& c : r.grid) {
        json cell = c.result ? cross_validation_to_json(*c.result)
                             : json{{"friend_k", c.friend_k}, {"stranger_k", c.stranger_k}, {"seed", c.seed}};
        if (!c.error.empty()) cell["error"] = c.error;
        grid.push_back(std::move(cell));
    }
    out["grid"] = std::move(grid);
    if (r.assumption) {
        json rows = json::array();
        for (const auto& row : r.assumption->rows)
            rows.push_back({{"parameter", row.parameter},
                            {"label", row.label},
                            {"estimate", real(row.estimate)},
                            {"std_error", real(row.std_error)},
                            {"z", real(row.z)},
                            {"p_value", real(row.p_value)},
                            {"estimable", row.estimable},
                            {"significant", row.significant}});
        out["assumption"] = {{"reference_label", r.assumption->model.reference_label},
                             {"n", r.assumption->model.n_obs},
                             {"converged", r.assumption->model.converged},
                             {"rows", std::move(rows)}};
    }
    if (r.deletions)
        out["deletions"] = {{"deleted_total", r.deletions->total},
                            {"hits_in_very_risky", r.deletions->hits},
                            {"fraction", r.deletions->fraction},
                            {"skipped", r.deletions->skipped}};
    return out;
}

void write_grid_csv(const std::string& path, const std::vector<GridCell>& grid) {
    std::ostringstream os;
    csv::write_row(os, {"friend_k", "stranger_k", "mean_adjusted_r2", "median_cluster_size", "validation_points",
                        "rmse", "significant_clusters", "stranger_clusters", "error"});
    for (const auto& c : grid) {
        if (c.result) {
            const auto& r = *c.result;
            csv::write_row(os, {std::to_string(c.friend_k), std::to_string(c.stranger_k),
                                csv::format_real(r.mean_adjusted_r2), csv::format_real(r.median_cluster_size),
                                std::to_string(r.validation_points), csv::format_real(r.rmse),
                                std::to_string(r.significant_clusters), std::to_string(r.stranger_clusters),
                                c.error});
        } else {
            csv::write_row(os, {std::to_string(c.friend_k), std::to_string(c.stranger_k), "", "", "", "", "", "",
                                c.error});
        }
    }
    io::write_text(path, os.str());
}

std::string format_grid_table(const std::vector<GridCell>& grid) {
    std::ostringstream os;
    os << fmt::format("{:>9} {:>11} {:>12} {:>12} {:>11} {:>11} {:>12}\n", "friend_k", "stranger_k", "adj. R2",
                      "median size", "validation", "RMSE", "significant");
    for (const auto& c : grid) {
        if (!c.result) {
            os << fmt::format("{:>9} {:>11}  failed: {}\n", c.friend_k, c.stranger_k, c.error);
            continue;
        }
        const auto& r = *c.result;
        os << fmt::format("{:>9} {:>11} {:>12.4f} {:>12.1f} {:>11} {:>11.4f} {:>12}\n", c.friend_k, c.stranger_k,
                          r.mean_adjusted_r2, r.median_cluster_size, r.validation_points, r.rmse,
                          fmt::format("{}/{}", r.significant_clusters, r.stranger_clusters));
    }
    return os.str();
}

} // namespace frisk
