#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "frisk/baseline.hpp"
#include "frisk/cluster.hpp"
#include "frisk/config.hpp"
#include "frisk/error.hpp"
#include "frisk/eval.hpp"
#include "frisk/impact.hpp"
#include "frisk/io.hpp"
#include "frisk/pipeline.hpp"
#include "frisk/risklabel.hpp"
#include "frisk/stages.hpp"
#include "frisk/synth.hpp"
#include "frisk/transform.hpp"

namespace fs = std::filesystem;
using namespace frisk;

namespace {

// Flags that override keys of the pipeline config file.
struct Overrides {
    std::string config;
    std::optional<std::string> network, labels, continuous, output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> friend_algorithm, stranger_algorithm;
    std::optional<int> friend_k, stranger_k;
    std::optional<std::uint64_t> friend_seed;
    std::optional<double> ridge;
    std::optional<int> max_iter, reference_label;
    std::optional<std::string> mode, ps_formula;
    bool include_first_group = false;
    std::optional<double> threshold_x, threshold_y;
    std::optional<double> holdout;
    std::optional<std::uint64_t> eval_seed;
    std::vector<std::string> grid;
    std::optional<std::string> deleted;
};

void add_paths(CLI::App* c, Overrides& o) {
    c->add_option("--config", o.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    c->add_option("--network", o.network, "Network JSON");
    c->add_option("--labels", o.labels, "Labels CSV (user_id,stranger_id,label)");
    c->add_option("--continuous-labels", o.continuous, "Real-valued labels CSV (user_id,stranger_id,value)");
}

void add_clustering(CLI::App* c, Overrides& o) {
    c->add_option("--friend-algorithm", o.friend_algorithm, "kmeans or agglomerative");
    c->add_option("--friend-k", o.friend_k, "Number of friend clusters");
    c->add_option("--friend-seed", o.friend_seed, "Seed for friend clustering");
    c->add_option("--stranger-algorithm", o.stranger_algorithm, "kmeans or agglomerative");
    c->add_option("--stranger-k", o.stranger_k, "Number of stranger clusters");
}

void add_baseline(CLI::App* c, Overrides& o) {
    c->add_option("--ridge", o.ridge, "L2 penalty of the multinomial fit");
    c->add_option("--max-iter", o.max_iter, "Newton iteration cap");
    c->add_option("--reference-label", o.reference_label, "Reference label (1, 2 or 3)");
}

void add_impact(CLI::App* c, Overrides& o) {
    c->add_option("--mode", o.mode, "single or multiple");
    c->add_option("--ps-formula", o.ps_formula, "frequency_mean or exact_match_fraction");
    c->add_flag("--include-first-group", o.include_first_group, "Use first-group strangers as impact equations too");
}

void add_thresholds(CLI::App* c, Overrides& o) {
    c->add_option("--threshold-x", o.threshold_x, "Im- share from which a cluster is risky");
    c->add_option("--threshold-y", o.threshold_y, "Im- share from which a cluster is very risky");
}

void add_eval(CLI::App* c, Overrides& o) {
    c->add_option("--holdout", o.holdout, "Hold-out fraction per stranger cluster");
    c->add_option("--eval-seed", o.eval_seed, "Seed of the hold-out split");
    c->add_option("--grid", o.grid, "friend_ks=2..9 stranger_ks=8,26,49")->expected(1, 2);
    c->add_option("--deleted", o.deleted, "Deleted friendships CSV (user_id,friend_id)");
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
    if (o.network) cfg.paths.network = *o.network;
    if (o.labels) cfg.paths.labels = *o.labels;
    if (o.continuous) cfg.paths.continuous_labels = *o.continuous;
    if (o.output_dir) cfg.paths.output_dir = *o.output_dir;
    if (o.seed) cfg.seed = *o.seed;
    if (o.friend_algorithm) cfg.friend_clustering.algorithm = cluster_algorithm_from_string(*o.friend_algorithm);
    if (o.stranger_algorithm) cfg.stranger_clustering.algorithm = cluster_algorithm_from_string(*o.stranger_algorithm);
    if (o.friend_k) cfg.friend_clustering.k = *o.friend_k;
    if (o.stranger_k) cfg.stranger_clustering.k = *o.stranger_k;
    if (o.friend_seed) cfg.friend_clustering.seed = *o.friend_seed;
    if (o.ridge) cfg.baseline.ridge = *o.ridge;
    if (o.max_iter) cfg.baseline.max_iter = *o.max_iter;
    if (o.reference_label) cfg.baseline.reference_label = *o.reference_label;
    if (o.mode) cfg.impact.mode = impact_mode_from_string(*o.mode);
    if (o.ps_formula) cfg.impact.ps_formula = ps_formula_from_string(*o.ps_formula);
    if (o.include_first_group) cfg.impact.include_first_group = true;
    if (o.threshold_x) cfg.thresholds.x = *o.threshold_x;
    if (o.threshold_y) cfg.thresholds.y = *o.threshold_y;
    if (o.holdout) cfg.eval.holdout = *o.holdout;
    if (o.eval_seed) cfg.eval.seed = *o.eval_seed;
    if (o.deleted) cfg.eval.deleted_friends = *o.deleted;
    for (const auto& item : o.grid) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error("--grid expects key=list, got '" + item + "'");
        const auto key = item.substr(0, eq);
        const auto ks = parse_k_list(item.substr(eq + 1));
        if (key == "friend_ks")
            cfg.eval.grid.friend_ks = ks;
        else if (key == "stranger_ks")
            cfg.eval.grid.stranger_ks = ks;
        else
            throw Error("--grid key must be friend_ks or stranger_ks, got '" + key + "'");
    }
    validate(cfg);
    return cfg;
}

std::string in_dir(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

StageOverrides oracle_overrides(const std::string& truth_path, bool clusters, bool baseline) {
    StageOverrides o;
    if (truth_path.empty()) return o;
    const auto truth = truth_from_json(nlohmann::json::parse(io::read_text(truth_path)));
    if (clusters) {
        o.friend_clusters = truth.friend_clusters;
        o.stranger_clusters = truth.stranger_clusters;
    }
    if (baseline) o.baseline = truth.baseline;
    return o;
}

std::vector<BaselineLabel> aligned_baselines(const LabeledDataset& data, const std::string& path) {
    std::map<RecordKey, BaselineLabel> by_key;
    for (auto& b : read_baselines_csv(path)) by_key[{b.user, b.stranger}] = b;
    std::vector<BaselineLabel> out;
    for (const auto& r : data.records) {
        auto it = by_key.find({r.user, r.stranger});
        if (it == by_key.end())
            throw Error(path + ": no baseline for (" + r.user + ", " + r.stranger + ")");
        out.push_back(it->second);
    }
    return out;
}

void print_report(const FriendRiskReport& r) {
    std::cout << "friend_cluster  Im+     Im-     n_sig  label\n";
    for (const auto& c : r.clusters) {
        if (c.share)
            std::cout << fmt::format("{:>14}  {:<6.3f}  {:<6.3f}  {:>5}  {}\n", c.friend_cluster, c.share->im_plus,
                                     c.share->im_minus, c.share->n_significant,
                                     c.label ? to_string(*c.label) : "undetermined");
        else
            std::cout << fmt::format("{:>14}  {:<6}  {:<6}  {:>5}  undetermined\n", c.friend_cluster, "-", "-", 0);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"frisk: friend-based privacy risk labels for strangers in a social graph"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    // ingest
    std::string in_network, in_labels;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a network and its labels");
    ingest_cmd->add_option("--network", in_network, "Network JSON")->required();
    ingest_cmd->add_option("--labels", in_labels, "Labels CSV")->required();

    // transform
    Overrides tr;
    std::string tr_out;
    auto* transform_cmd = app.add_subcommand("transform", "Write SFMF and SFMS frequency matrices");
    add_paths(transform_cmd, tr);
    transform_cmd->add_option("--out-dir", tr_out, "Directory for sfmf.csv and sfms.csv")->required();

    // cluster
    Overrides cl;
    std::string cl_sfm, cl_kind = "friends", cl_out;
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster the rows of an SFM export");
    cluster_cmd->add_option("--config", cl.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    cluster_cmd->add_option("--sfm", cl_sfm, "sfmf.csv or sfms.csv")->required()->check(CLI::ExistingFile);
    cluster_cmd->add_option("--kind", cl_kind, "friends or strangers")->check(CLI::IsMember({"friends", "strangers"}));
    add_clustering(cluster_cmd, cl);
    cluster_cmd->add_option("--seed", cl.seed, "Master seed");
    cluster_cmd->add_option("--out", cl_out, "Assignment CSV")->required();

    // baseline
    Overrides bl;
    std::string bl_sfms, bl_model_in, bl_model_out, bl_labels_out, bl_table;
    auto* baseline_cmd = app.add_subcommand("baseline", "Fit the baseline model on first-group labels");
    add_paths(baseline_cmd, bl);
    add_baseline(baseline_cmd, bl);
    baseline_cmd->add_option("--sfms", bl_sfms, "sfms.csv")->required()->check(CLI::ExistingFile);
    baseline_cmd->add_option("--model", bl_model_in, "Apply this saved model instead of fitting");
    baseline_cmd->add_option("--out-model", bl_model_out, "Where to save the fitted model");
    baseline_cmd->add_option("--out-labels", bl_labels_out, "Baseline labels CSV")->required();
    baseline_cmd->add_option("--significance", bl_table, "Write the Wald table as CSV");

    // impact
    Overrides im;
    std::string im_sfms, im_fc, im_sc, im_baselines, im_out;
    auto* impact_cmd = app.add_subcommand("impact", "Estimate friend impacts per stranger cluster");
    add_paths(impact_cmd, im);
    add_impact(impact_cmd, im);
    impact_cmd->add_option("--sfms", im_sfms, "sfms.csv")->required()->check(CLI::ExistingFile);
    impact_cmd->add_option("--friend-clusters", im_fc, "Friend assignment CSV")->required()->check(CLI::ExistingFile);
    impact_cmd->add_option("--stranger-clusters", im_sc, "Stranger assignment CSV")->required()->check(CLI::ExistingFile);
    impact_cmd->add_option("--baselines", im_baselines, "Baseline labels CSV")->required()->check(CLI::ExistingFile);
    impact_cmd->add_option("--out", im_out, "Impact matrix CSV")->required();

    // label
    Overrides lb;
    std::string lb_impacts, lb_fc, lb_out, lb_clusters_csv, lb_friends_csv;
    auto* label_cmd = app.add_subcommand("label", "Assign risk labels to friend clusters");
    label_cmd->add_option("--config", lb.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    add_thresholds(label_cmd, lb);
    label_cmd->add_option("--impacts", lb_impacts, "Impact matrix CSV")->required()->check(CLI::ExistingFile);
    label_cmd->add_option("--friend-clusters", lb_fc, "Friend assignment CSV")->required()->check(CLI::ExistingFile);
    label_cmd->add_option("--out", lb_out, "Friend risk report JSON")->required();
    label_cmd->add_option("--clusters-csv", lb_clusters_csv, "Cluster table CSV");
    label_cmd->add_option("--friends-csv", lb_friends_csv, "Per-friend labels CSV");

    // evaluate
    Overrides ev;
    std::string ev_out, ev_truth;
    bool ev_oracle_baseline = false;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Hold-out RMSE, cluster-count grid and assumption check");
    add_paths(evaluate_cmd, ev);
    add_clustering(evaluate_cmd, ev);
    add_baseline(evaluate_cmd, ev);
    add_impact(evaluate_cmd, ev);
    add_thresholds(evaluate_cmd, ev);
    add_eval(evaluate_cmd, ev);
    evaluate_cmd->add_option("--seed", ev.seed, "Master seed");
    evaluate_cmd->add_option("--out-dir", ev_out, "Directory for evaluation.json and grid.csv")->required();
    evaluate_cmd->add_option("--truth", ev_truth, "Planted truth JSON: inject its clusters (oracle mode)");
    evaluate_cmd->add_flag("--oracle-baseline", ev_oracle_baseline, "Also inject the planted baseline model");

    // synth
    std::string sy_config, sy_out;
    std::optional<std::uint64_t> sy_seed;
    std::optional<double> sy_sigma, sy_homophily;
    std::optional<std::string> sy_rounding;
    std::optional<int> sy_users, sy_strangers;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted impacts");
    synth_cmd->add_option("--config", sy_config, "Synth config JSON")->check(CLI::ExistingFile);
    synth_cmd->add_option("--seed", sy_seed, "Seed");
    synth_cmd->add_option("--sigma", sy_sigma, "Label noise standard deviation");
    synth_cmd->add_option("--homophily", sy_homophily, "Copy probability, in [0, 1]");
    synth_cmd->add_option("--rounding", sy_rounding, "continuous or discrete");
    synth_cmd->add_option("--users", sy_users, "Number of users");
    synth_cmd->add_option("--strangers-per-user", sy_strangers, "Strangers per user");
    synth_cmd->add_option("--out-dir", sy_out, "Output directory")->required();

    // pipeline
    Overrides pl;
    std::string pl_truth;
    bool pl_oracle_baseline = false;
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
    add_paths(pipeline_cmd, pl);
    add_clustering(pipeline_cmd, pl);
    add_baseline(pipeline_cmd, pl);
    add_impact(pipeline_cmd, pl);
    add_thresholds(pipeline_cmd, pl);
    add_eval(pipeline_cmd, pl);
    pipeline_cmd->add_option("--seed", pl.seed, "Master seed");
    pipeline_cmd->add_option("--output-dir", pl.output_dir, "Artifact directory");
    pipeline_cmd->add_option("--truth", pl_truth, "Planted truth JSON: inject its clusters (oracle mode)");
    pipeline_cmd->add_flag("--oracle-baseline", pl_oracle_baseline, "Also inject the planted baseline model");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            const auto report = ingest(in_network, in_labels);
            std::cout << format_ingest(report);
            return report.ok() ? 0 : 1;
        }

        if (*transform_cmd) {
            const auto cfg = resolve(tr);
            const auto data = load_dataset(cfg);
            validate_records(data.net, data.records);
            ensure_dir(tr_out);
            write_sfm_csv(in_dir(tr_out, "sfmf.csv"), build_sfmf(data.net, labeling_users(data.records)));
            write_sfm_csv(in_dir(tr_out, "sfms.csv"), build_sfms(data.net, data.records));
            return 0;
        }

        if (*cluster_cmd) {
            const auto cfg = resolve(cl);
            const auto kind = sfm_kind_from_string(cl_kind);
            const auto sfm = read_sfm_csv(cl_sfm, kind);
            const auto& cc = kind == SfmKind::friends ? cfg.friend_clustering : cfg.stranger_clustering;
            const auto seed = kind == SfmKind::friends ? cfg.friend_seed() : cfg.stranger_seed();
            const auto a = run_clustering(sfm, cc.algorithm, cc.k, seed);
            write_assignment_csv(cl_out, a);
            const auto sizes = a.sizes();
            std::cout << to_string(kind) << ": " << sfm.size() << " rows in " << a.k() << " clusters (sizes";
            for (auto s : sizes) std::cout << ' ' << s;
            std::cout << ")\n";
            return 0;
        }

        if (*baseline_cmd) {
            const auto cfg = resolve(bl);
            const auto data = load_dataset(cfg);
            validate_records(data.net, data.records);
            const auto sfms = read_sfm_csv(bl_sfms, SfmKind::strangers);
            const auto design = build_design(data.net, sfms, data.records, cfg.baseline.design);
            MultinomialModel model;
            if (!bl_model_in.empty()) {
                model = load_model(bl_model_in);
                check_model_columns(model, design.columns);
            } else {
                const auto train_records = first_group(data.records, data.net);
                if (train_records.empty()) throw Error("no first-group records to train on");
                const auto train = build_design(data.net, sfms, train_records, cfg.baseline.design);
                std::vector<int> labels;
                for (const auto& r : train_records) labels.push_back(r.label);
                model = fit_multinomial(train.x, labels, train.columns,
                                        {cfg.baseline.ridge, cfg.baseline.max_iter, cfg.baseline.reference_label});
                const auto rows = coefficient_significance(model);
                std::cout << format_significance_table(model, rows);
                if (!bl_table.empty()) write_significance_csv(bl_table, rows);
            }
            if (!bl_model_out.empty()) save_model(bl_model_out, model);
            write_baselines_csv(bl_labels_out, baseline_labels(model, design));
            return 0;
        }

        if (*impact_cmd) {
            const auto cfg = resolve(im);
            const auto data = load_dataset(cfg);
            validate_records(data.net, data.records);
            const auto sfms = read_sfm_csv(im_sfms, SfmKind::strangers);
            const auto fc = read_assignment_csv(im_fc, SfmKind::friends);
            const auto sc = read_assignment_csv(im_sc, SfmKind::strangers);
            const auto baselines = aligned_baselines(data, im_baselines);
            std::set<RecordKey> fg;
            for (const auto& r : first_group(data.records, data.net)) fg.insert({r.user, r.stranger});
            const auto items = labeled_strangers(data, sfms, sc, baselines, fg, cfg.impact.ps_formula);
            std::vector<LabeledStranger> eligible;
            for (const auto& item : items)
                if (impact_eligible(fg, {item.user, item.stranger}, cfg)) eligible.push_back(item);
            const auto eqs = build_equations(data.net, eligible, fc, sc, cfg.impact.mode);
            const auto m = solve_impacts(eqs, cfg.impact.mode);
            write_impacts_csv(im_out, m);
            std::size_t significant = 0;
            for (const auto& [_, g] : m.groups) significant += g.significant;
            std::cout << eqs.equations.size() << " equations (" << eqs.dropped_zero_past
                      << " dropped with zero Past); " << significant << " of " << m.groups.size()
                      << " stranger clusters significant\n";
            return 0;
        }

        if (*label_cmd) {
            const auto cfg = resolve(lb);
            const auto m = read_impacts_csv(lb_impacts);
            const auto fc = read_assignment_csv(lb_fc, SfmKind::friends);
            const auto report = build_friend_report(m, fc, cfg.thresholds);
            io::write_text(lb_out, report_to_json(report).dump(2) + "\n");
            if (!lb_clusters_csv.empty() || !lb_friends_csv.empty()) {
                if (lb_clusters_csv.empty() || lb_friends_csv.empty())
                    throw Error("--clusters-csv and --friends-csv go together");
                write_report_csv(lb_clusters_csv, lb_friends_csv, report);
            }
            print_report(report);
            return 0;
        }

        if (*evaluate_cmd) {
            const auto cfg = resolve(ev);
            const auto data = load_dataset(cfg);
            const auto overrides = oracle_overrides(ev_truth, true, ev_oracle_baseline);
            const auto fitted = run_stages(data, cfg, overrides);
            const auto report = evaluate(data, cfg, fitted, overrides);
            ensure_dir(ev_out);
            io::write_text(in_dir(ev_out, "evaluation.json"), evaluation_to_json(report).dump(2) + "\n");
            std::vector<GridCell> rows = report.grid;
            if (rows.empty() && report.holdout)
                rows.push_back({cfg.friend_clustering.k, cfg.stranger_clustering.k, cfg.seed, report.holdout, {}});
            write_grid_csv(in_dir(ev_out, "grid.csv"), rows);
            std::cout << format_grid_table(rows);
            if (report.holdout && !report.holdout->has_validation_points()) std::cout << "no validation points\n";
            if (const auto* best = best_cell(report.grid))
                std::cout << "best mean adjusted R2 at friend_k=" << best->friend_k
                          << " stranger_k=" << best->stranger_k << "\n";
            if (report.assumption) std::cout << "\n" << format_significance_table(report.assumption->model, report.assumption->rows);
            if (report.deletions)
                std::cout << fmt::format("\ndeleted friends in very risky clusters: {} of {} ({:.3f}), {} skipped\n",
                                         report.deletions->hits, report.deletions->total, report.deletions->fraction,
                                         report.deletions->skipped);
            return 0;
        }

        if (*synth_cmd) {
            SynthConfig sc = sy_config.empty() ? SynthConfig{}
                                               : synth_config_from_json(nlohmann::json::parse(io::read_text(sy_config)));
            if (sy_seed) sc.seed = *sy_seed;
            if (sy_sigma) sc.label_noise_sigma = *sy_sigma;
            if (sy_homophily) sc.homophily = *sy_homophily;
            if (sy_rounding) sc.rounding = label_rounding_from_string(*sy_rounding);
            if (sy_users) sc.n_users = *sy_users;
            if (sy_strangers) sc.strangers_per_user = *sy_strangers;
            validate(sc);
            const auto ds = generate(sc);
            ensure_dir(sy_out);
            io::write_network(in_dir(sy_out, "network.json"), ds.data.net);
            io::write_labels(in_dir(sy_out, "labels.csv"), ds.data.records);
            if (!ds.data.continuous.empty())
                io::write_continuous_labels(in_dir(sy_out, "continuous_labels.csv"), ds.data.continuous);
            io::write_text(in_dir(sy_out, "truth.json"), truth_to_json(ds.truth).dump(2) + "\n");
            io::write_text(in_dir(sy_out, "synth_config.json"), synth_config_to_json(sc).dump(2) + "\n");
            std::cout << ds.data.net.node_count() << " nodes, " << ds.data.net.edge_count() << " edges, "
                      << ds.data.records.size() << " labels (" << ds.labels.clamped << " clamped)\n";
            return 0;
        }

        if (*pipeline_cmd) {
            const auto cfg = resolve(pl);
            const auto overrides = oracle_overrides(pl_truth, true, pl_oracle_baseline);
            const auto result = run_pipeline(cfg, overrides);
            const auto& m = result.manifest;
            for (const auto& a : m.artifacts) std::cout << a.sha256.substr(0, 16) << "  " << a.name << "\n";
            if (!m.complete) {
                std::cerr << "error: " << m.error << "\n";
                return result.exit_code;
            }
            if (result.stages) print_report(result.stages->report);
            std::cout << "manifest: " << in_dir(cfg.paths.output_dir, "manifest.json") << "\n";
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
