#include <doctest.h>

#include <filesystem>

#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/pipeline.hpp"
#include "frisk/synth.hpp"
#include "helpers.hpp"

using namespace frisk;
using nlohmann::json;

namespace {

const std::vector<std::string> kArtifacts{"sfmf.csv",          "sfms.csv",           "friend_clusters.csv",
                                          "stranger_clusters.csv", "baseline_model.json", "baseline_labels.csv",
                                          "impacts.csv",       "friend_risk.json",   "evaluation.json"};

SynthDataset small_dataset(std::uint64_t seed) {
    SynthConfig c;
    c.n_users = 5;
    c.strangers_per_user = 60;
    c.rounding = LabelRounding::discrete;
    c.label_noise_sigma = 0.2;
    c.seed = seed;
    return generate(c);
}

// Writes the dataset and returns a config pointing at it.
PipelineConfig write_inputs(const testing::TempDir& dir, const LabeledDataset& data) {
    io::write_network(dir.file("network.json"), data.net);
    io::write_labels(dir.file("labels.csv"), data.records);
    PipelineConfig cfg;
    cfg.paths.network = dir.file("network.json");
    cfg.paths.labels = dir.file("labels.csv");
    cfg.paths.output_dir = dir.file("out");
    cfg.seed = 17;
    cfg.stranger_clustering.k = 8;
    return cfg;
}

std::vector<std::string> artifact_hashes(const Manifest& m) {
    std::vector<std::string> out;
    for (const auto& a : m.artifacts) out.push_back(a.name + "=" + a.sha256);
    return out;
}

} // namespace

TEST_CASE("config parsing") {
    auto cfg = config_from_json(json{{"seed", 5},
                                     {"clustering", {{"friend", {{"k", 4}}}, {"stranger", {{"algorithm", "kmeans"}}}}},
                                     {"eval", {{"grid", {{"friend_ks", "2..4"}}}}}});
    CHECK(cfg.seed == 5);
    CHECK(cfg.friend_clustering.k == 4);
    CHECK(cfg.stranger_clustering.algorithm == ClusterAlgorithm::kmeans);
    CHECK(cfg.eval.grid.friend_ks == std::vector<int>{2, 3, 4});
    CHECK(config_from_json(config_to_json(cfg)).seed == 5);
    CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));

    CHECK_THROWS_WITH_AS(config_from_json(json{{"sed", 5}}), doctest::Contains("unknown key 'sed'"), Error);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"baseline", {{"ridge", -1.0}}}}), doctest::Contains("baseline.ridge"),
                         Error);
    CHECK_THROWS_AS(config_from_json(json{{"risklabel", {{"x", 0.6}, {"y", 0.5}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"eval", {{"holdout", 1.0}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"seed", "one"}}), Error);

    testing::TempDir dir("cfg");
    io::write_text(dir.file("c.json"), R"({"paths": {"network": "n.json"}})");
    CHECK(load_config(dir.file("c.json")).paths.network == dir.file("n.json"));
    io::write_text(dir.file("bad.json"), "{\"seed\": ");
    CHECK_THROWS_AS(load_config(dir.file("bad.json")), ParseError);
}

TEST_CASE("k lists") {
    CHECK(parse_k_list("2..9") == std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(parse_k_list("8,26,49") == std::vector<int>{8, 26, 49});
    CHECK(parse_k_list("26,8,2..3") == std::vector<int>{2, 3, 8, 26});
    CHECK_THROWS_AS(parse_k_list("9..2"), Error);
    CHECK_THROWS_AS(parse_k_list("2,,3"), Error);
    CHECK_THROWS_AS(parse_k_list("0"), Error);
    CHECK_THROWS_AS(parse_k_list("x"), Error);
}

TEST_CASE("pipeline writes every artifact and a manifest") {
    testing::TempDir dir("pipe");
    auto ds = small_dataset(1);
    auto cfg = write_inputs(dir, ds.data);
    auto result = run_pipeline(cfg);
    CHECK(result.exit_code == 0);
    const auto& m = result.manifest;
    CHECK(m.complete);
    REQUIRE(m.artifacts.size() == kArtifacts.size());
    for (std::size_t i = 0; i < kArtifacts.size(); ++i) {
        CHECK(m.artifacts[i].name == kArtifacts[i]);
        const auto path = cfg.paths.output_dir + "/" + kArtifacts[i];
        CHECK(m.artifacts[i].sha256 == sha256_file(path));
        CHECK(m.artifacts[i].bytes == std::filesystem::file_size(path));
    }
    CHECK(m.inputs.size() == 2);
    auto on_disk = manifest_from_json(json::parse(io::read_text(cfg.paths.output_dir + "/manifest.json")));
    CHECK(artifact_hashes(on_disk) == artifact_hashes(m));
    CHECK(on_disk.seed == 17);
    CHECK_FALSE(std::filesystem::exists(cfg.paths.output_dir + "/.frisk.lock"));
}

TEST_CASE("same config and seed give identical artifacts") {
    testing::TempDir dir("det");
    auto cfg = write_inputs(dir, small_dataset(2).data);
    auto first = run_pipeline(cfg);
    const auto manifest_bytes = io::read_text(cfg.paths.output_dir + "/manifest.json");
    auto second = run_pipeline(cfg);
    CHECK(artifact_hashes(first.manifest) == artifact_hashes(second.manifest));
    CHECK(io::read_text(cfg.paths.output_dir + "/manifest.json") == manifest_bytes);

    cfg.seed = 18;
    cfg.paths.output_dir = dir.file("other");
    auto third = run_pipeline(cfg);
    CHECK(artifact_hashes(third.manifest) != artifact_hashes(first.manifest));
}

TEST_CASE("a failing stage leaves a partial manifest") {
    testing::TempDir dir("fail");
    auto cfg = write_inputs(dir, small_dataset(3).data);
    cfg.friend_clustering.k = 100000;
    auto result = run_pipeline(cfg);
    CHECK(result.exit_code == 1);
    CHECK_FALSE(result.manifest.complete);
    CHECK(result.manifest.failed_stage == "cluster");
    REQUIRE(result.manifest.artifacts.size() == 2);
    CHECK(result.manifest.artifacts[0].name == "sfmf.csv");
    auto on_disk = manifest_from_json(json::parse(io::read_text(cfg.paths.output_dir + "/manifest.json")));
    CHECK(on_disk.failed_stage == "cluster");
    CHECK_FALSE(on_disk.complete);
}

TEST_CASE("missing inputs fail in the ingest stage") {
    testing::TempDir dir("missing");
    PipelineConfig cfg;
    cfg.paths.network = dir.file("absent.json");
    cfg.paths.labels = dir.file("absent.csv");
    cfg.paths.output_dir = dir.file("out");
    try {
        run_pipeline(cfg);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "ingest");
    }
}

TEST_CASE("a locked output directory is refused") {
    testing::TempDir dir("lock");
    auto cfg = write_inputs(dir, small_dataset(4).data);
    std::filesystem::create_directories(cfg.paths.output_dir);
    {
        DirectoryLock held(cfg.paths.output_dir);
        CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("locked"), Error);
        CHECK_THROWS_AS(DirectoryLock(cfg.paths.output_dir), Error);
    }
    CHECK(run_pipeline(cfg).exit_code == 0);
}

TEST_CASE("pipeline equals the modules composed by hand") {
    auto ds = small_dataset(5);
    const auto& data = ds.data;
    PipelineConfig cfg;
    cfg.seed = 23;
    cfg.stranger_clustering.k = 8;
    const auto staged = run_stages(data, cfg);

    const Sfm sfmf = build_sfmf(data.net, labeling_users(data.records));
    const Sfm sfms = build_sfms(data.net, data.records);
    const auto fc = kmeans(sfmf, cfg.friend_clustering.k, cfg.friend_seed());
    const auto sc = agglomerative(sfms, cfg.stranger_clustering.k);
    const auto fg_records = first_group(data.records, data.net);
    std::set<RecordKey> fg;
    std::vector<int> labels;
    for (const auto& r : fg_records) {
        fg.insert({r.user, r.stranger});
        labels.push_back(r.label);
    }
    const auto train = build_design(data.net, sfms, fg_records, cfg.baseline.design);
    const auto model = fit_multinomial(train.x, labels, train.columns, {cfg.baseline.ridge, cfg.baseline.max_iter, 2});
    const auto baselines = baseline_labels(model, build_design(data.net, sfms, data.records, cfg.baseline.design));
    std::vector<LabeledStranger> eligible;
    for (const auto& item : labeled_strangers(data, sfms, sc, baselines, fg, cfg.impact.ps_formula))
        if (!fg.count({item.user, item.stranger})) eligible.push_back(item);
    const auto impacts = solve_impacts(build_equations(data.net, eligible, fc, sc, cfg.impact.mode), cfg.impact.mode);
    const auto report = build_friend_report(impacts, fc, cfg.thresholds);

    CHECK(staged.friend_clusters.ids() == fc.ids());
    CHECK(staged.stranger_clusters.ids() == sc.ids());
    CHECK(staged.model.params == model.params);
    CHECK(report_to_json(staged.report).dump() == report_to_json(report).dump());
}

TEST_CASE("ingest reports counts and located errors") {
    testing::TempDir dir("ingest");
    auto ds = small_dataset(6);
    io::write_network(dir.file("n.json"), ds.data.net);
    io::write_labels(dir.file("l.csv"), ds.data.records);
    auto ok = ingest(dir.file("n.json"), dir.file("l.csv"));
    CHECK(ok.ok());
    CHECK(ok.users == 5);
    CHECK(ok.labels == ds.data.records.size());
    CHECK(ok.strangers == ds.data.records.size());
    CHECK(ok.first_group == first_group(ds.data.records, ds.data.net).size());
    CHECK(format_ingest(ok).find("0 errors") != std::string::npos);

    auto text = io::read_text(dir.file("l.csv"));
    const auto& r0 = ds.data.records[0];
    const auto friend_id = ds.truth.friend_clusters.keys()[0].second;
    text += r0.user + ",nobody,1\n" + r0.user + "," + friend_id + ",2\n" + r0.user + ",x,4\n";
    io::write_text(dir.file("bad.csv"), text);
    const auto n = ds.data.records.size();
    auto bad = ingest(dir.file("n.json"), dir.file("bad.csv"));
    REQUIRE(bad.errors.size() == 3);
    const auto line = [&](std::size_t k) { return dir.file("bad.csv") + ":" + std::to_string(n + 1 + k); };
    bool saw_label = false, saw_distance = false, saw_unknown = false;
    for (const auto& e : bad.errors) {
        saw_label |= e.locus == line(3) && e.message.find("label 4") != std::string::npos;
        saw_distance |= e.locus == line(2) && e.message.find("distance") != std::string::npos;
        saw_unknown |= e.locus == line(1) && e.message.find("nobody") != std::string::npos;
    }
    CHECK(saw_label);
    CHECK(saw_distance);
    CHECK(saw_unknown);

    auto missing = ingest(dir.file("absent.json"), dir.file("l.csv"));
    CHECK_FALSE(missing.ok());
}

TEST_CASE("manifest JSON round trips") {
    Manifest m;
    m.seed = 3;
    m.config = json{{"a", 1}};
    m.artifacts.push_back({"x.csv", "transform", std::string(64, 'a'), 10});
    m.failed_stage = "impact";
    m.error = "boom";
    auto back = manifest_from_json(manifest_to_json(m));
    CHECK(manifest_to_json(back) == manifest_to_json(m));
    CHECK_THROWS_AS(manifest_from_json(json{{"format", "other"}}), Error);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
