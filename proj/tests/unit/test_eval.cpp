#include <doctest.h>

#include <cmath>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/eval.hpp"
#include "frisk/io.hpp"
#include "frisk/random.hpp"
#include "frisk/synth.hpp"
#include "helpers.hpp"

using namespace frisk;

namespace {

SynthDataset dataset(std::uint64_t seed, double sigma, int users = 8, int strangers = 100) {
    SynthConfig c;
    c.n_users = users;
    c.strangers_per_user = strangers;
    c.label_noise_sigma = sigma;
    c.seed = seed;
    return generate(c);
}

StageOverrides oracle(const SynthDataset& ds) {
    return {ds.truth.friend_clusters, ds.truth.stranger_clusters, ds.truth.baseline};
}

std::vector<RecordKey> keys_in_clusters(const std::vector<int>& sizes, ClusterAssignment& out) {
    std::vector<RecordKey> keys;
    std::vector<int> ids;
    for (std::size_t c = 0; c < sizes.size(); ++c)
        for (int i = 0; i < sizes[c]; ++i) {
            keys.emplace_back("u", "s" + std::to_string(c + 1) + "_" + std::to_string(i));
            ids.push_back(static_cast<int>(c) + 1);
        }
    out = ClusterAssignment(SfmKind::strangers, static_cast<int>(sizes.size()), keys, ids);
    return keys;
}

// Replaces the labels of a synthetic dataset with draws from a multinomial
// whose label-1 and label-3 logits move in opposite directions with the
// number of mutual friends (slope `a`).
void relabel(LabeledDataset& data, double a, Rng& rng) {
    data.continuous.clear();
    for (auto& r : data.records) {
        const double m = static_cast<double>(mutual_friends(data.net, r.user, r.stranger).size()) - 2.5;
        const double e1 = std::exp(a * m), e3 = std::exp(-a * m);
        const double u = uniform01(rng) * (e1 + 1.0 + e3);
        r.label = u < e1 ? 1 : (u < e1 + 1.0 ? 2 : 3);
    }
}

const SignificanceRow& row(const AssumptionFit& fit, const std::string& parameter, int label) {
    for (const auto& r : fit.rows)
        if (r.parameter == parameter && r.label == label) return r;
    throw Error("no row " + parameter);
}

} // namespace

TEST_CASE("hold-out split is stratified per stranger cluster") {
    ClusterAssignment sc;
    auto keys = keys_in_clusters({9, 10, 25}, sc);
    auto test = holdout_split(keys, sc, 0.1, 7);
    std::map<int, int> per;
    for (const auto& k : test) ++per[sc.at(k.first, k.second)];
    CHECK(per.count(1) == 0);
    CHECK(per[2] == 1);
    CHECK(per[3] == 3);
    CHECK(holdout_split(keys, sc, 0.1, 7) == test);
    CHECK(holdout_split(keys, sc, 0.5, 7).size() == 5u + 13u);
    CHECK_THROWS_AS(holdout_split(keys, sc, 0.0, 7), Error);
    CHECK_THROWS_AS(holdout_split(keys, sc, 1.0, 7), Error);
}

TEST_CASE("noise-free oracle cross-validation predicts exactly") {
    // Large enough that every held-out equation lies in its group's row space.
    auto ds = dataset(1, 0.0, 20, 200);
    PipelineConfig cfg;
    auto cv = cross_validate(ds.data, cfg, 0.1, 5, oracle(ds));
    CHECK(cv.validation_points > 0);
    CHECK(cv.rmse < 1e-6);
    CHECK(in_sample_rmse(ds.data, cfg, oracle(ds)) < 1e-6);
    CHECK(cv.mean_adjusted_r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("noisy cross-validation error sits near the noise level") {
    auto ds = dataset(2, 0.1, 20, 200);
    PipelineConfig cfg;
    auto cv = cross_validate(ds.data, cfg, 0.1, 5, oracle(ds));
    CHECK(cv.rmse >= 0.05);
    CHECK(cv.rmse <= 0.2);
    CHECK(in_sample_rmse(ds.data, cfg, oracle(ds)) <= cv.rmse);
    for (const auto& p : cv.predictions) CHECK(std::isfinite(p.predicted));
}

TEST_CASE("cross-validation is deterministic") {
    auto ds = dataset(3, 0.1);
    PipelineConfig cfg;
    cfg.stranger_clustering.k = 8;
    auto a = cross_validate(ds.data, cfg, 0.2, 9);
    auto b = cross_validate(ds.data, cfg, 0.2, 9);
    CHECK(cross_validation_to_json(a).dump() == cross_validation_to_json(b).dump());
}

TEST_CASE("grid search cells") {
    auto ds = dataset(4, 0.1);
    PipelineConfig cfg;
    auto one = grid_search(ds.data, {2}, {8}, cfg, 21);
    REQUIRE(one.size() == 1);
    REQUIRE(one[0].result);
    auto alone_cfg = grid_cell_config(cfg, 2, 8, 21);
    auto alone = cross_validate(ds.data, alone_cfg, alone_cfg.eval.holdout, alone_cfg.eval_seed());
    CHECK(cross_validation_to_json(*one[0].result).dump() == cross_validation_to_json(alone).dump());

    auto sweep = grid_search(ds.data, {3}, {2, 4, 8, 16}, cfg, 21);
    REQUIRE(sweep.size() == 4);
    for (std::size_t i = 1; i < sweep.size(); ++i)
        CHECK(sweep[i].result->median_cluster_size <= sweep[i - 1].result->median_cluster_size);

    testing::TempDir dir("grid");
    write_grid_csv(dir.file("g.csv"), sweep);
    auto rows = csv::read_file(dir.file("g.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].fields == std::vector<std::string>{"friend_k", "stranger_k", "mean_adjusted_r2",
                                                     "median_cluster_size", "validation_points", "rmse",
                                                     "significant_clusters", "stranger_clusters", "error"});
    CHECK(rows[1].fields[1] == "2");
    CHECK(format_grid_table(sweep).find("median size") != std::string::npos);
    CHECK_THROWS_AS(grid_search(ds.data, {}, {8}, cfg, 21), Error);
}

TEST_CASE("failed grid cells are recorded") {
    auto ds = dataset(4, 0.0, 4, 40);
    PipelineConfig cfg;
    auto grid = grid_search(ds.data, {2, 100000}, {4}, cfg, 3);
    REQUIRE(grid.size() == 2);
    CHECK(grid[0].result);
    CHECK_FALSE(grid[1].result);
    CHECK_FALSE(grid[1].error.empty());
    CHECK(best_cell(grid) == &grid[0]);
}

TEST_CASE("best cell prefers the smallest k among ties") {
    auto cell = [](int fk, int sk, double r2) {
        GridCell c;
        c.friend_k = fk;
        c.stranger_k = sk;
        c.result = CrossValidation{};
        c.result->mean_adjusted_r2 = r2;
        return c;
    };
    std::vector<GridCell> grid{cell(7, 8, 0.9), cell(6, 8, 0.9 - 5e-10), cell(5, 8, 0.8), cell(6, 4, 0.9 - 1e-8)};
    CHECK(best_cell(grid)->friend_k == 6);
    CHECK(best_cell(grid)->stranger_k == 8);
    grid[1].result->mean_adjusted_r2 = std::nan("");
    CHECK(best_cell(grid)->friend_k == 7);
    CHECK(best_cell({}) == nullptr);
}

TEST_CASE("deletion check counts very risky friends") {
    FriendRiskReport report;
    for (int i = 0; i < 10; ++i)
        report.friends.push_back({"u", "f" + std::to_string(i), 1, i < 7 ? std::optional(FriendRisk::very_risky)
                                                                          : std::optional(FriendRisk::risky)});
    std::vector<RecordKey> all, none;
    for (int i = 0; i < 7; ++i) all.emplace_back("u", "f" + std::to_string(i));
    for (int i = 7; i < 10; ++i) none.emplace_back("u", "f" + std::to_string(i));
    CHECK(validate_deletions(report, all).fraction == 1.0);
    CHECK(validate_deletions(report, none).fraction == 0.0);
    none.emplace_back("u", "ghost");
    auto d = validate_deletions(report, none);
    CHECK(d.skipped == 1);
    CHECK(d.total == 3);
    CHECK(validate_deletions(report, {}).fraction == 0.0);
}

TEST_CASE("deletion fraction tracks the very risky share") {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        FriendRiskReport report;
        std::vector<RecordKey> deleted;
        for (int i = 0; i < 40; ++i) {
            const auto id = "f" + std::to_string(i);
            report.friends.push_back({"u", id, 1, uniform01(rng) < 0.7 ? FriendRisk::very_risky : FriendRisk::risky});
            deleted.emplace_back("u", id);
        }
        sum += validate_deletions(report, deleted).fraction;
    }
    CHECK(std::abs(sum / 50.0 - 0.7) < 0.1);
}

TEST_CASE("deleted friends CSV") {
    testing::TempDir dir("del");
    io::write_text(dir.file("d.csv"), "user_id,friend_id\nu,f1\nu,f2\n");
    CHECK(read_deleted_friends(dir.file("d.csv")).size() == 2);
    io::write_text(dir.file("bad.csv"), "user,friend\n");
    CHECK_THROWS_AS(read_deleted_friends(dir.file("bad.csv")), ParseError);
}

TEST_CASE("assumption test finds a planted mutual-friend effect") {
    auto ds = dataset(5, 0.0, 20, 100);
    Rng rng(5);
    relabel(ds.data, 0.8, rng);
    auto fit = validate_assumption(ds.data, BaselineConfig{});
    REQUIRE(fit.model.converged);
    const auto& r1 = row(fit, "mutual_friends", 1);
    const auto& r3 = row(fit, "mutual_friends", 3);
    CHECK(r1.estimate > 0.0);
    CHECK(r3.estimate < 0.0);
    CHECK(r1.p_value < 0.01);
    CHECK(r3.p_value < 0.01);
    CHECK(fit.rows.size() == 2 * (fit.model.feature_names.size() + 1));
    for (int label : {1, 3}) CHECK_NOTHROW(row(fit, "mutual_friends", label));

    EvaluationReport report;
    report.assumption = fit;
    auto doc = evaluation_to_json(report);
    CHECK(doc["assumption"]["rows"].size() == fit.rows.size());
    CHECK(doc["assumption"]["reference_label"] == 2);
}

TEST_CASE("assumption test stays quiet without an effect") {
    auto ds = dataset(6, 0.0, 20, 100);
    Rng rng(6);
    int quiet = 0, total = 0;
    for (int rep = 0; rep < 100; ++rep) {
        relabel(ds.data, 0.0, rng);
        auto fit = validate_assumption(ds.data, BaselineConfig{});
        for (int label : {1, 3}) {
            quiet += row(fit, "mutual_friends", label).p_value > 0.05;
            ++total;
        }
    }
    CHECK(quiet >= 85 * total / 100);
}
