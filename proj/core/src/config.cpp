#include "frisk/config.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/random.hpp"

namespace frisk {

using nlohmann::json;

std::uint64_t PipelineConfig::friend_seed() const { return friend_clustering.seed.value_or(derive_seed(seed, 1)); }
std::uint64_t PipelineConfig::stranger_seed() const { return stranger_clustering.seed.value_or(derive_seed(seed, 2)); }
std::uint64_t PipelineConfig::eval_seed() const { return eval.seed.value_or(derive_seed(seed, 3)); }

void validate(const PipelineConfig& cfg) {
    if (cfg.friend_clustering.k < 1) throw Error("config clustering.friend.k must be positive");
    if (cfg.stranger_clustering.k < 1) throw Error("config clustering.stranger.k must be positive");
    if (!(cfg.baseline.ridge >= 0.0)) throw Error("config baseline.ridge must be non-negative");
    if (cfg.baseline.max_iter < 1) throw Error("config baseline.max_iter must be positive");
    if (cfg.baseline.reference_label < 1 || cfg.baseline.reference_label > 3)
        throw Error("config baseline.reference_label must be 1, 2 or 3");
    if (!cfg.baseline.design.frequencies && !cfg.baseline.design.visibility_indicators &&
        !cfg.baseline.design.mutual_friend_count && cfg.baseline.design.columns.empty())
        throw Error("config baseline.design selects no columns");
    try {
        validate_thresholds(cfg.thresholds);
    } catch (const Error& e) {
        throw Error(std::string("config risklabel: ") + e.what());
    }
    if (!(cfg.eval.holdout > 0.0 && cfg.eval.holdout < 1.0)) throw Error("config eval.holdout must lie in (0, 1)");
    for (int k : cfg.eval.grid.friend_ks)
        if (k < 1) throw Error("config eval.grid.friend_ks entries must be positive");
    for (int k : cfg.eval.grid.stranger_ks)
        if (k < 1) throw Error("config eval.grid.stranger_ks entries must be positive");
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw Error("config " + where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
            throw Error("config " + where + ": unknown key '" + key + "'");
}

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base) / path).lexically_normal().string();
}

ClusterConfig cluster_from_json(const json& j, ClusterConfig def, const std::string& where) {
    reject_unknown(j, {"algorithm", "k", "seed"}, where);
    if (j.contains("algorithm")) def.algorithm = cluster_algorithm_from_string(j.at("algorithm").get<std::string>());
    if (j.contains("k")) def.k = j.at("k").get<int>();
    if (j.contains("seed")) def.seed = j.at("seed").get<std::uint64_t>();
    return def;
}

json cluster_to_json(const ClusterConfig& c) {
    json j{{"algorithm", to_string(c.algorithm)}, {"k", c.k}};
    if (c.seed) j["seed"] = *c.seed;
    return j;
}

} // namespace

PipelineConfig config_from_json(const json& doc, const std::string& base_dir) {
    PipelineConfig cfg;
    try {
        reject_unknown(doc, {"paths", "seed", "clustering", "baseline", "impact", "risklabel", "eval"}, "top level");
        if (doc.contains("paths")) {
            const auto& p = doc.at("paths");
            reject_unknown(p, {"network", "labels", "continuous_labels", "output_dir"}, "paths");
            cfg.paths.network = resolve(p.value("network", ""), base_dir);
            cfg.paths.labels = resolve(p.value("labels", ""), base_dir);
            cfg.paths.continuous_labels = resolve(p.value("continuous_labels", ""), base_dir);
            cfg.paths.output_dir = resolve(p.value("output_dir", ""), base_dir);
        }
        if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("clustering")) {
            const auto& c = doc.at("clustering");
            reject_unknown(c, {"friend", "stranger"}, "clustering");
            if (c.contains("friend"))
                cfg.friend_clustering = cluster_from_json(c.at("friend"), cfg.friend_clustering, "clustering.friend");
            if (c.contains("stranger"))
                cfg.stranger_clustering =
                    cluster_from_json(c.at("stranger"), cfg.stranger_clustering, "clustering.stranger");
        }
        if (doc.contains("baseline")) {
            const auto& b = doc.at("baseline");
            reject_unknown(b, {"ridge", "max_iter", "reference_label", "frequencies", "visibility_indicators",
                               "mutual_friend_count", "columns"},
                           "baseline");
            cfg.baseline.ridge = b.value("ridge", cfg.baseline.ridge);
            cfg.baseline.max_iter = b.value("max_iter", cfg.baseline.max_iter);
            cfg.baseline.reference_label = b.value("reference_label", cfg.baseline.reference_label);
            cfg.baseline.design.frequencies = b.value("frequencies", cfg.baseline.design.frequencies);
            cfg.baseline.design.visibility_indicators =
                b.value("visibility_indicators", cfg.baseline.design.visibility_indicators);
            cfg.baseline.design.mutual_friend_count =
                b.value("mutual_friend_count", cfg.baseline.design.mutual_friend_count);
            if (b.contains("columns")) cfg.baseline.design.columns = b.at("columns").get<std::vector<std::string>>();
        }
        if (doc.contains("impact")) {
            const auto& i = doc.at("impact");
            reject_unknown(i, {"mode", "ps_formula", "include_first_group"}, "impact");
            if (i.contains("mode")) cfg.impact.mode = impact_mode_from_string(i.at("mode").get<std::string>());
            if (i.contains("ps_formula"))
                cfg.impact.ps_formula = ps_formula_from_string(i.at("ps_formula").get<std::string>());
            cfg.impact.include_first_group = i.value("include_first_group", cfg.impact.include_first_group);
        }
        if (doc.contains("risklabel")) {
            const auto& r = doc.at("risklabel");
            reject_unknown(r, {"x", "y"}, "risklabel");
            cfg.thresholds.x = r.value("x", cfg.thresholds.x);
            cfg.thresholds.y = r.value("y", cfg.thresholds.y);
        }
        if (doc.contains("eval")) {
            const auto& e = doc.at("eval");
            reject_unknown(e, {"holdout", "seed", "grid", "deleted_friends"}, "eval");
            cfg.eval.holdout = e.value("holdout", cfg.eval.holdout);
            if (e.contains("seed")) cfg.eval.seed = e.at("seed").get<std::uint64_t>();
            cfg.eval.deleted_friends = resolve(e.value("deleted_friends", ""), base_dir);
            if (e.contains("grid")) {
                const auto& g = e.at("grid");
                reject_unknown(g, {"friend_ks", "stranger_ks"}, "eval.grid");
                auto ks = [](const json& v) {
                    return v.is_string() ? parse_k_list(v.get<std::string>()) : v.get<std::vector<int>>();
                };
                if (g.contains("friend_ks")) cfg.eval.grid.friend_ks = ks(g.at("friend_ks"));
                if (g.contains("stranger_ks")) cfg.eval.grid.stranger_ks = ks(g.at("stranger_ks"));
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json eval{{"holdout", cfg.eval.holdout},
              {"grid", {{"friend_ks", cfg.eval.grid.friend_ks}, {"stranger_ks", cfg.eval.grid.stranger_ks}}}};
    if (cfg.eval.seed) eval["seed"] = *cfg.eval.seed;
    if (!cfg.eval.deleted_friends.empty()) eval["deleted_friends"] = cfg.eval.deleted_friends;
    json baseline{{"ridge", cfg.baseline.ridge},
                  {"max_iter", cfg.baseline.max_iter},
                  {"reference_label", cfg.baseline.reference_label},
                  {"frequencies", cfg.baseline.design.frequencies},
                  {"visibility_indicators", cfg.baseline.design.visibility_indicators},
                  {"mutual_friend_count", cfg.baseline.design.mutual_friend_count}};
    if (!cfg.baseline.design.columns.empty()) baseline["columns"] = cfg.baseline.design.columns;
    return json{{"paths",
                 {{"network", cfg.paths.network},
                  {"labels", cfg.paths.labels},
                  {"continuous_labels", cfg.paths.continuous_labels},
                  {"output_dir", cfg.paths.output_dir}}},
                {"seed", cfg.seed},
                {"clustering",
                 {{"friend", cluster_to_json(cfg.friend_clustering)},
                  {"stranger", cluster_to_json(cfg.stranger_clustering)}}},
                {"baseline", std::move(baseline)},
                {"impact",
                 {{"mode", to_string(cfg.impact.mode)},
                  {"ps_formula", to_string(cfg.impact.ps_formula)},
                  {"include_first_group", cfg.impact.include_first_group}}},
                {"risklabel", {{"x", cfg.thresholds.x}, {"y", cfg.thresholds.y}}},
                {"eval", std::move(eval)}};
}

PipelineConfig load_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ":byte " + std::to_string(e.byte), "malformed JSON");
    }
    return config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

std::vector<int> parse_k_list(const std::string& text) {
    std::set<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(start, comma - start);
        if (item.empty()) throw Error("empty entry in k list '" + text + "'");
        if (auto dots = item.find(".."); dots != std::string::npos) {
            const auto lo = csv::parse_int(item.substr(0, dots), "k list");
            const auto hi = csv::parse_int(item.substr(dots + 2), "k list");
            if (lo > hi) throw Error("descending range '" + item + "' in k list");
            for (auto k = lo; k <= hi; ++k) out.insert(static_cast<int>(k));
        } else {
            out.insert(static_cast<int>(csv::parse_int(item, "k list")));
        }
        start = comma + 1;
    }
    for (int k : out)
        if (k < 1) throw Error("k list entries must be positive");
    return {out.begin(), out.end()};
}

} // namespace frisk
