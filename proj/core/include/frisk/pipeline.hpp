#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/config.hpp"
#include "frisk/eval.hpp"
#include "frisk/io.hpp"
#include "frisk/network.hpp"
#include "frisk/stages.hpp"

namespace frisk {

inline constexpr const char* kToolVersion = "0.3.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

struct ManifestEntry {
    std::string name;   ///< file name inside the output directory
    std::string stage;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct Manifest {
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<ManifestEntry> inputs;  ///< name holds the input path
    std::vector<ManifestEntry> artifacts;
    bool complete = false;
    std::string failed_stage;
    std::string error;
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& doc);

/// Holds `<dir>/.frisk.lock` for its lifetime; throws if another run holds it.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::string& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::string path_;
};

/// Network, labels and optional continuous labels named by the config.
LabeledDataset load_dataset(const PipelineConfig& cfg);

struct PipelineResult {
    Manifest manifest;
    std::optional<StageResults> stages;
    std::optional<EvaluationReport> evaluation;
    int exit_code = 0;
};

/// Runs every stage and writes, in order: sfmf.csv, sfms.csv,
/// friend_clusters.csv, stranger_clusters.csv, baseline_model.json,
/// baseline_labels.csv, impacts.csv, friend_risk.json, evaluation.json, then
/// manifest.json. On a stage failure the manifest lists the artifacts written
/// so far plus the failing stage, and exit_code is 1.
PipelineResult run_pipeline(const PipelineConfig& cfg, const StageOverrides& overrides = {});
PipelineResult run_pipeline(const LabeledDataset& data, const PipelineConfig& cfg,
                            const StageOverrides& overrides = {});

/// Evaluation stage on its own: hold-out cross-validation, assumption fit,
/// optional grid and deletion check as configured.
EvaluationReport evaluate(const LabeledDataset& data, const PipelineConfig& cfg, const StageResults& fitted,
                          const StageOverrides& overrides = {});

struct IngestReport {
    std::vector<io::Issue> errors;
    std::size_t users = 0;
    std::size_t friends = 0;
    std::size_t strangers = 0;
    std::size_t labels = 0;
    std::size_t first_group = 0;

    bool ok() const noexcept { return errors.empty(); }
};

/// Schema and invariant checks over the two input files; never throws for
/// content problems.
IngestReport ingest(const std::string& network_path, const std::string& labels_path);
std::string format_ingest(const IngestReport& r);

} // namespace frisk
