#include "frisk/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "frisk/error.hpp"
#include "frisk/log.hpp"

namespace frisk {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("sha256 computation failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(io::read_text(path)); }

json manifest_to_json(const Manifest& m) {
    auto entries = [](const std::vector<ManifestEntry>& v) {
        json out = json::array();
        for (const auto& e : v)
            out.push_back({{"name", e.name}, {"stage", e.stage}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        return out;
    };
    json out{{"format", "frisk.manifest"},
             {"format_version", 1},
             {"tool_version", kToolVersion},
             {"seed", m.seed},
             {"status", m.complete ? "complete" : "failed"},
             {"config", m.config},
             {"inputs", entries(m.inputs)},
             {"artifacts", entries(m.artifacts)}};
    if (!m.complete) {
        out["failed_stage"] = m.failed_stage;
        out["error"] = m.error;
    }
    return out;
}

Manifest manifest_from_json(const json& doc) {
    try {
        if (doc.value("format", "") != "frisk.manifest") throw Error("not a manifest document");
        Manifest m;
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.config = doc.at("config");
        m.complete = doc.at("status").get<std::string>() == "complete";
        m.failed_stage = doc.value("failed_stage", "");
        m.error = doc.value("error", "");
        auto entries = [](const json& arr) {
            std::vector<ManifestEntry> out;
            for (const auto& e : arr)
                out.push_back({e.at("name").get<std::string>(), e.at("stage").get<std::string>(),
                               e.at("sha256").get<std::string>(), e.at("bytes").get<std::uintmax_t>()});
            return out;
        };
        m.inputs = entries(doc.at("inputs"));
        m.artifacts = entries(doc.at("artifacts"));
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
}

DirectoryLock::DirectoryLock(const std::string& dir) : path_((fs::path(dir) / ".frisk.lock").string()) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        const int err = errno;
        if (err == EEXIST)
            throw Error("output directory '" + dir + "' is locked by another run (remove " + path_ +
                        " if that run is gone)");
        throw Error("cannot create lock file " + path_ + ": " + std::strerror(err));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirectoryLock::~DirectoryLock() { ::unlink(path_.c_str()); }

LabeledDataset load_dataset(const PipelineConfig& cfg) {
    if (cfg.paths.network.empty()) throw Error("config paths.network is not set");
    if (cfg.paths.labels.empty()) throw Error("config paths.labels is not set");
    for (const auto* p : {&cfg.paths.network, &cfg.paths.labels, &cfg.paths.continuous_labels})
        if (!p->empty() && !fs::exists(*p)) throw Error("input file '" + *p + "' does not exist");
    LabeledDataset data;
    data.net = io::read_network(cfg.paths.network);
    data.records = io::read_labels(cfg.paths.labels);
    if (!cfg.paths.continuous_labels.empty()) data.continuous = io::read_continuous_labels(cfg.paths.continuous_labels);
    std::set<RecordKey> keys;
    for (const auto& r : data.records) keys.insert({r.user, r.stranger});
    for (const auto& [key, _] : data.continuous)
        if (!keys.count(key))
            throw Error("continuous label for (" + key.first + ", " + key.second + ") has no integer label");
    return data;
}

EvaluationReport evaluate(const LabeledDataset& data, const PipelineConfig& cfg, const StageResults& fitted,
                          const StageOverrides& overrides) {
    EvaluationReport report;
    report.holdout = cross_validate(data, cfg, cfg.eval.holdout, cfg.eval_seed(), overrides);
    try {
        report.assumption = validate_assumption(data, fitted.sfms, cfg.baseline);
    } catch (const Error& e) {
        log::warn(std::string("assumption fit skipped: ") + e.what());
    }
    if (!cfg.eval.grid.friend_ks.empty() || !cfg.eval.grid.stranger_ks.empty()) {
        auto fks = cfg.eval.grid.friend_ks;
        auto sks = cfg.eval.grid.stranger_ks;
        if (fks.empty()) fks = {cfg.friend_clustering.k};
        if (sks.empty()) sks = {cfg.stranger_clustering.k};
        report.grid = grid_search(data, fks, sks, cfg, cfg.seed, overrides);
    }
    if (!cfg.eval.deleted_friends.empty())
        report.deletions = validate_deletions(fitted.report, read_deleted_friends(cfg.eval.deleted_friends));
    return report;
}

namespace {

void write_manifest(const fs::path& dir, const Manifest& m) {
    io::write_text((dir / "manifest.json").string(), manifest_to_json(m).dump(2) + "\n");
}

} // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const StageOverrides& overrides) {
    validate(cfg);
    LabeledDataset data;
    try {
        data = load_dataset(cfg);
    } catch (const std::exception& e) {
        throw StageError("ingest", e.what());
    }
    return run_pipeline(data, cfg, overrides);
}

PipelineResult run_pipeline(const LabeledDataset& data, const PipelineConfig& cfg, const StageOverrides& overrides) {
    validate(cfg);
    if (cfg.paths.output_dir.empty()) throw Error("config paths.output_dir is not set");
    const fs::path dir(cfg.paths.output_dir);
    fs::create_directories(dir);
    DirectoryLock lock(dir.string());

    PipelineResult result;
    Manifest& m = result.manifest;
    m.seed = cfg.seed;
    m.config = config_to_json(cfg);
    for (const auto* p : {&cfg.paths.network, &cfg.paths.labels, &cfg.paths.continuous_labels})
        if (!p->empty() && fs::exists(*p))
            m.inputs.push_back({*p, "input", sha256_file(*p), fs::file_size(*p)});

    auto add = [&](const std::string& name, const std::string& stage) {
        const auto path = (dir / name).string();
        m.artifacts.push_back({name, stage, sha256_file(path), fs::file_size(path)});
    };
    auto path = [&](const char* name) { return (dir / name).string(); };

    const StageCallback write_stage = [&](const std::string& stage, const StageResults& r) {
        if (stage == "transform") {
            write_sfm_csv(path("sfmf.csv"), r.sfmf);
            add("sfmf.csv", stage);
            write_sfm_csv(path("sfms.csv"), r.sfms);
            add("sfms.csv", stage);
        } else if (stage == "cluster") {
            write_assignment_csv(path("friend_clusters.csv"), r.friend_clusters);
            add("friend_clusters.csv", stage);
            write_assignment_csv(path("stranger_clusters.csv"), r.stranger_clusters);
            add("stranger_clusters.csv", stage);
        } else if (stage == "baseline") {
            save_model(path("baseline_model.json"), r.model);
            add("baseline_model.json", stage);
            write_baselines_csv(path("baseline_labels.csv"), r.baselines);
            add("baseline_labels.csv", stage);
        } else if (stage == "impact") {
            write_impacts_csv(path("impacts.csv"), r.impacts);
            add("impacts.csv", stage);
        } else if (stage == "label") {
            io::write_text(path("friend_risk.json"), report_to_json(r.report).dump(2) + "\n");
            add("friend_risk.json", stage);
        }
    };

    try {
        result.stages = run_stages(data, cfg, overrides, {}, write_stage);
        try {
            result.evaluation = evaluate(data, cfg, *result.stages, overrides);
            io::write_text(path("evaluation.json"), evaluation_to_json(*result.evaluation).dump(2) + "\n");
            add("evaluation.json", "evaluate");
        } catch (const std::exception& e) {
            throw StageError("evaluate", e.what());
        }
        m.complete = true;
    } catch (const StageError& e) {
        m.complete = false;
        m.failed_stage = e.stage();
        m.error = e.what();
        log::error(e.what());
        result.exit_code = 1;
    }
    write_manifest(dir, m);
    return result;
}

IngestReport ingest(const std::string& network_path, const std::string& labels_path) {
    IngestReport r;
    auto issue = [&](const Error& e, const std::string& fallback) {
        if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
            std::string msg = pe->what();
            const std::string prefix = pe->locus() + ": ";
            if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
            r.errors.push_back({pe->locus(), msg});
        } else {
            r.errors.push_back({fallback, e.what()});
        }
    };

    std::optional<SocialNetwork> net;
    try {
        net = io::read_network(network_path);
    } catch (const Error& e) {
        issue(e, network_path);
    }
    io::LabelsParse parsed;
    try {
        parsed = io::parse_labels(io::read_text(labels_path), labels_path);
    } catch (const Error& e) {
        issue(e, labels_path);
    }
    r.errors.insert(r.errors.end(), parsed.issues.begin(), parsed.issues.end());
    r.labels = parsed.records.size();
    if (!net) return r;

    for (const auto& i : check_records(*net, parsed.records))
        r.errors.push_back({labels_path + ":" + std::to_string(parsed.lines.at(i.index)), i.message});

    std::set<NodeId> users, friends, strangers;
    std::vector<RiskLabelRecord> valid;
    for (const auto& rec : parsed.records) {
        if (!net->contains(rec.user) || !net->contains(rec.stranger)) continue;
        users.insert(rec.user);
        strangers.insert(rec.stranger);
        if (rec.user != rec.stranger &&
            capped_distance(*net, net->index_of(rec.user), net->index_of(rec.stranger)) == 2)
            valid.push_back(rec);
    }
    for (const auto& u : users)
        for (NodeIndex f : net->neighbors(net->index_of(u))) friends.insert(net->id_of(f));
    r.users = users.size();
    r.friends = friends.size();
    r.strangers = strangers.size();
    r.first_group = first_group(valid, *net).size();
    return r;
}

std::string format_ingest(const IngestReport& r) {
    std::ostringstream os;
    for (const auto& e : r.errors) os << "error: " << e.locus << ": " << e.message << "\n";
    os << r.errors.size() << (r.errors.size() == 1 ? " error" : " errors") << "\n";
    os << "users: " << r.users << "\n"
       << "friends: " << r.friends << "\n"
       << "strangers: " << r.strangers << "\n"
       << "labels: " << r.labels << "\n"
       << "first-group labels: " << r.first_group << "\n";
    return os.str();
}

} // namespace frisk
