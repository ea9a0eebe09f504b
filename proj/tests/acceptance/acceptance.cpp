// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "frisk/cluster.hpp"
#include "frisk/csv.hpp"
#include "frisk/eval.hpp"
#include "frisk/impact.hpp"
#include "frisk/io.hpp"
#include "frisk/pipeline.hpp"
#include "frisk/risklabel.hpp"
#include "frisk/synth.hpp"
#include "frisk/transform.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace frisk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

StageOverrides oracle(const SynthDataset& ds) {
    return {ds.truth.friend_clusters, ds.truth.stranger_clusters, ds.truth.baseline};
}

Outcome worked_example() {
    auto net = testing::bare_network({"u", "f1", "f2", "f3", "s"},
                                     {{"u", "f1"}, {"u", "f2"}, {"u", "f3"}, {"s", "f1"}, {"s", "f2"}, {"s", "f3"}});
    ClusterAssignment fc{SfmKind::friends, 2, {{"u", "f1"}, {"u", "f2"}, {"u", "f3"}}, {1, 2, 2}};
    ClusterAssignment sc{SfmKind::strangers, 1, {{"u", "s"}}, {1}};
    LabeledStranger item{"u", "s", 2.3, 2.7, -0.2};

    auto single = build_equation(net, item, fc, sc, ImpactMode::single);
    auto multiple = build_equation(net, item, fc, sc, ImpactMode::multiple);
    const bool single_ok = single.coefficients == std::map<int, double>{{1, -0.2}, {2, -0.2}} &&
                           std::abs(single.response + 0.4) < 1e-15;
    const bool multiple_ok = multiple.coefficients == std::map<int, double>{{1, -0.2}, {2, -0.4}} &&
                             std::abs(multiple.response + 0.4) < 1e-15;
    auto m = solve_impacts({{single}, 0}, ImpactMode::single);
    const double sum = m.entries.at({1, 1}).value + m.entries.at({2, 1}).value;
    return {single_ok && multiple_ok && std::abs(sum - 2.0) <= 1e-12,
            fmt::format("single {}, multiple {}, pair sum {:.17g}", single_ok ? "ok" : "wrong",
                        multiple_ok ? "ok" : "wrong", sum)};
}

Outcome frequency_transform() {
    std::vector<NodeSpec> nodes{{"u", {{"hometown", "torino"}}}};
    std::vector<testing::Edge> edges;
    for (int i = 0; i < 100; ++i) {
        const std::string id = "f" + std::to_string(100 + i);
        nodes.push_back({id, {{"hometown", i < 15 ? "milano" : "roma"}}});
        edges.emplace_back("u", id);
    }
    const double worked = feature_frequency(SocialNetwork({"hometown"}, nodes, edges), "u", "hometown", "milano");

    std::size_t owners = 0, mismatches = 0;
    for (std::uint64_t seed = 1; owners < 1000; ++seed) {
        auto net = testing::random_network(25, 0.25, seed, 4, 3);
        std::set<NodeId> with_friends;
        for (const auto& id : net.nodes())
            if (!net.neighbors(net.index_of(id)).empty() && owners + with_friends.size() < 1000)
                with_friends.insert(id);
        owners += with_friends.size();
        const Sfm sfmf = build_sfmf(net, with_friends);
        for (const auto& row : sfmf.rows())
            for (std::size_t f = 0; f < net.feature_count(); ++f)
                mismatches += row.values[f] !=
                              testing::count_frequency(net, row.owner, f, net.value(net.index_of(row.subject), f));
    }
    return {worked == 0.15 && mismatches == 0,
            fmt::format("15/100 -> {}, {} owners, {} mismatches", worked, owners, mismatches)};
}

Outcome logistic_mle() {
    auto s = testing::random_three_class(150, 3, 11);
    Rng rng(5);
    double worst_rel = 0.0;
    for (int point = 0; point < 50; ++point) {
        Eigen::MatrixXd params(2, 4);
        for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = normal(rng, 0.0, 1.5);
        auto obj = multinomial_objective(s.x, s.y, params, 2, 0.0);
        Eigen::VectorXd fd(8);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c) {
                const double h = 1e-5;
                Eigen::MatrixXd up = params, down = params;
                up(r, c) += h;
                down(r, c) -= h;
                fd(r * 4 + c) = (multinomial_objective(s.x, s.y, up, 2, 0.0).value -
                                 multinomial_objective(s.x, s.y, down, 2, 0.0).value) /
                                (2 * h);
            }
        worst_rel = std::max(worst_rel, (obj.gradient - fd).norm() / std::max(1.0, obj.gradient.norm()));
    }

    auto planted = testing::planted_binary(0.7, 1.2, 2000, 21);
    auto model = fit_multinomial(planted.x, planted.y, {"x1"}, {1e-4, 100, 2});
    auto [a, b] = testing::grid_mle(planted);
    const double mle_gap = std::max(std::abs(model.intercept(1) - a), std::abs(model.coefficients(1)(0) - b));

    double worst_sum = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        MultinomialModel m;
        m.feature_names = {"a", "b", "c", "d"};
        m.params.resize(2, 5);
        const double scale = trial % 10 == 0 ? 40.0 : 3.0;
        for (Eigen::Index i = 0; i < m.params.size(); ++i) m.params(i) = normal(rng, 0.0, scale);
        Eigen::VectorXd row(4);
        for (int j = 0; j < 4; ++j) row(j) = uniform01(rng);
        auto p = predict_probs(m, row);
        worst_sum = std::max(worst_sum, std::abs(p[0] + p[1] + p[2] - 1.0));
    }
    return {worst_rel < 1e-6 && mle_gap < 1e-3 && worst_sum < 1e-9,
            fmt::format("gradient rel {:.2e}, MLE vs grid {:.2e}, normalization {:.2e}", worst_rel, mle_gap,
                        worst_sum)};
}

// 20 users x 800 strangers gives about 615 strangers per stranger cluster.
SynthConfig recovery_config(std::uint64_t seed, double sigma) {
    SynthConfig c;
    c.n_users = 20;
    c.strangers_per_user = 800;
    c.label_noise_sigma = sigma;
    c.seed = seed;
    return c;
}

double recovery_sup(const SynthConfig& c) {
    auto ds = generate(c);
    PipelineConfig cfg;
    cfg.friend_clustering.k = c.n_friend_clusters_true;
    cfg.stranger_clustering.k = c.n_stranger_clusters_true;
    return recovery_error(ds.truth, run_stages(ds.data, cfg, oracle(ds)).impacts).sup_norm;
}

Outcome impact_recovery() {
    const double clean = recovery_sup(recovery_config(1, 0.0));
    int within = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const double sup = recovery_sup(recovery_config(seed, 0.1));
        within += sup < 0.1;
        worst = std::max(worst, sup);
    }
    return {clean < 1e-6 && within >= 95,
            fmt::format("noise-free sup {:.2e}, sigma 0.1 within 0.1 in {}/100 (max {:.3f})", clean, within, worst)};
}

Outcome thresholds() {
    const std::vector<std::pair<double, FriendRisk>> cases{{0.19, FriendRisk::not_risky},
                                                           {0.2, FriendRisk::risky},
                                                           {0.49, FriendRisk::risky},
                                                           {0.5, FriendRisk::very_risky}};
    std::string got;
    bool ok = true;
    for (const auto& [v, want] : cases) {
        const auto label = assign_friend_label(v);
        ok = ok && label == want;
        got += fmt::format("{}{} -> {}", got.empty() ? "" : ", ", v, to_string(label));
    }
    return {ok, got};
}

Outcome cross_validation() {
    SynthConfig c;
    c.n_users = 20;
    c.strangers_per_user = 200;
    c.seed = 1;
    auto clean = generate(c);
    c.label_noise_sigma = 0.1;
    auto noisy = generate(c);
    PipelineConfig cfg;
    const auto cv_clean = cross_validate(clean.data, cfg, 0.1, 5, oracle(clean));
    const auto cv_noisy = cross_validate(noisy.data, cfg, 0.1, 5, oracle(noisy));

    // Table-shaped grid over stranger cluster counts.
    auto grid = grid_search(noisy.data, {6}, {8, 26, 49}, cfg, 7, oracle(noisy));
    testing::TempDir dir("acceptance_grid");
    write_grid_csv(dir.file("grid.csv"), grid);
    const auto rows = csv::read_file(dir.file("grid.csv"));
    const std::vector<std::string> wanted{"stranger_k", "mean_adjusted_r2", "median_cluster_size",
                                          "validation_points", "rmse"};
    std::size_t present = 0;
    for (const auto& col : wanted) {
        const auto& header = rows.front().fields;
        const auto it = std::find(header.begin(), header.end(), col);
        if (it == header.end()) continue;
        const auto idx = static_cast<std::size_t>(it - header.begin());
        bool filled = rows.size() == grid.size() + 1;
        for (std::size_t r = 1; r < rows.size(); ++r) filled = filled && !rows[r].fields[idx].empty();
        present += filled;
    }
    const bool ok = cv_clean.rmse < 1e-6 && cv_noisy.rmse >= 0.05 && cv_noisy.rmse <= 0.2 && present == wanted.size();
    return {ok, fmt::format("noise-free RMSE {:.2e}, sigma 0.1 RMSE {:.4f}, report columns {}/{}", cv_clean.rmse,
                            cv_noisy.rmse, present, wanted.size())};
}

// Friend clusters come from k-means on the friend frequency rows; stranger
// clusters and the baseline model are the planted ones.
Outcome grid_echo() {
    std::vector<int> fks{2, 3, 4, 5, 6, 7, 8, 9};
    std::string picks;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthConfig c;
        c.n_features = 20;
        c.seed = seed;
        auto ds = generate(c);
        PipelineConfig cfg;
        cfg.seed = seed;
        StageOverrides ov;
        ov.stranger_clusters = ds.truth.stranger_clusters;
        ov.baseline = ds.truth.baseline;
        auto grid = grid_search(ds.data, fks, {c.n_stranger_clusters_true}, cfg, seed, ov);
        const auto* best = best_cell(grid);
        const int k = best ? best->friend_k : -1;
        ok = ok && (k == 5 || k == 6 || k == 7);
        picks += fmt::format("{}{}", picks.empty() ? "" : ",", k);
    }
    return {ok, "argmax friend_k per seed: " + picks};
}

Outcome determinism() {
    SynthConfig c;
    c.n_users = 6;
    c.strangers_per_user = 80;
    c.rounding = LabelRounding::discrete;
    c.label_noise_sigma = 0.2;
    c.seed = 8;
    auto ds = generate(c);
    testing::TempDir dir("acceptance_det");
    io::write_network(dir.file("network.json"), ds.data.net);
    io::write_labels(dir.file("labels.csv"), ds.data.records);
    PipelineConfig cfg;
    cfg.paths.network = dir.file("network.json");
    cfg.paths.labels = dir.file("labels.csv");
    cfg.paths.output_dir = dir.file("out");
    cfg.seed = 99;
    cfg.stranger_clustering.k = 8;
    cfg.eval.grid.friend_ks = {4, 6};
    auto first = run_pipeline(cfg);
    const auto bytes = io::read_text(dir.file("out/manifest.json"));
    auto second = run_pipeline(cfg);
    const bool same = io::read_text(dir.file("out/manifest.json")) == bytes;
    return {first.exit_code == 0 && second.exit_code == 0 && same &&
                first.manifest.artifacts.size() == 9,
            fmt::format("{} artifacts, manifest {}", first.manifest.artifacts.size(),
                        same ? "byte-identical" : "differs")};
}

Outcome clustering() {
    std::size_t monotone = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        const int n = 20 + static_cast<int>(uniform_index(rng, 200));
        const int k = 2 + static_cast<int>(uniform_index(rng, 8));
        auto fit = kmeans_fit(testing::random_points(n, 4, seed * 31), k, seed);
        bool ok = !fit.objective.empty();
        for (std::size_t i = 1; i < fit.objective.size(); ++i)
            ok = ok && fit.objective[i] <= fit.objective[i - 1] * (1 + 1e-12) + 1e-15;
        monotone += ok;
    }

    Rng rng(42);
    Eigen::MatrixXd blobs(200, 2);
    std::vector<int> truth(200);
    for (int i = 0; i < 200; ++i) {
        truth[static_cast<std::size_t>(i)] = i % 2;
        blobs(i, 0) = (i % 2 ? 10.0 : 0.0) + normal(rng, 0.0, 0.1);
        blobs(i, 1) = normal(rng, 0.0, 0.1);
    }
    const double ari = adjusted_rand_index(kmeans_fit(blobs, 2, 1).labels, truth);

    std::size_t sets = 0, agree = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        Rng r(seed);
        const int n = 2 + static_cast<int>(uniform_index(r, 9));
        auto x = testing::random_points(n, 3, seed + 1000);
        auto tree = complete_linkage(x);
        bool ok = true;
        for (int k = 1; k <= n; ++k)
            ok = ok && testing::partition_of(cut_dendrogram(tree, k)) == testing::naive_complete_linkage(x, k);
        ++sets;
        agree += ok;
    }
    return {monotone == 100 && ari == 1.0 && agree == sets,
            fmt::format("monotone {}/100, two-blob ARI {:.3f}, linkage oracle {}/{}", monotone, ari, agree, sets)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "worked equation", 1.0, worked_example},
        {2, "frequency transform", 5.0, frequency_transform},
        {3, "logistic MLE", 30.0, logistic_mle},
        {4, "impact recovery", 120.0, impact_recovery},
        {5, "threshold boundaries", 1.0, thresholds},
        {6, "cross-validation", 60.0, cross_validation},
        {7, "friend_k grid argmax", 600.0, grid_echo},
        {8, "determinism", 60.0, determinism},
        {9, "clustering invariants", 30.0, clustering},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = out.pass && in_time;
        failed += !pass;
        std::printf("criterion %d %s: %s | %s | %.2fs (limit %.0fs)%s\n", c.id, pass ? "PASS" : "FAIL", c.name,
                    out.detail.c_str(), secs, c.budget_s, in_time ? "" : " over time");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
