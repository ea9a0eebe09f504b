#include "frisk/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"

namespace frisk::io {

using nlohmann::json;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

SocialNetwork parse_network(const json& doc, const std::string& source) {
    auto fail = [&](const std::string& locus, const std::string& what) -> ParseError {
        return ParseError(source + ":" + locus, what);
    };
    if (!doc.is_object()) throw fail("$", "top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "features" && key != "nodes" && key != "edges") throw fail(key, "unknown key");
    for (const char* key : {"features", "nodes", "edges"})
        if (!doc.contains(key) || !doc.at(key).is_array()) throw fail(key, "missing or not an array");

    std::vector<std::string> features;
    const auto& jf = doc.at("features");
    for (std::size_t i = 0; i < jf.size(); ++i) {
        if (!jf[i].is_string()) throw fail("features[" + std::to_string(i) + "]", "expected a string");
        features.push_back(jf[i].get<std::string>());
    }
    const std::set<std::string> feature_set(features.begin(), features.end());

    std::vector<NodeSpec> nodes;
    const auto& jn = doc.at("nodes");
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const std::string locus = "nodes[" + std::to_string(i) + "]";
        const auto& n = jn[i];
        if (!n.is_object()) throw fail(locus, "expected an object");
        if (!n.contains("id") || !n.at("id").is_string()) throw fail(locus + ".id", "missing or not a string");
        NodeSpec spec{n.at("id").get<std::string>(), {}};
        if (n.contains("profile")) {
            const auto& p = n.at("profile");
            if (!p.is_object()) throw fail(locus + ".profile", "expected an object");
            for (const auto& [k, v] : p.items()) {
                if (!feature_set.count(k)) throw fail(locus + ".profile." + k, "feature not declared in 'features'");
                if (!v.is_string()) throw fail(locus + ".profile." + k, "expected a string value");
                spec.profile.emplace(k, v.get<std::string>());
            }
        }
        nodes.push_back(std::move(spec));
    }

    std::vector<std::pair<NodeId, NodeId>> edges;
    const auto& je = doc.at("edges");
    for (std::size_t i = 0; i < je.size(); ++i) {
        const auto& e = je[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
            throw fail("edges[" + std::to_string(i) + "]", "expected [id, id]");
        edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }

    try {
        return SocialNetwork(std::move(features), std::move(nodes), edges);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(source, e.what());
    }
}

SocialNetwork read_network(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ":byte " + std::to_string(e.byte), "malformed JSON");
    }
    return parse_network(doc, path);
}

json network_to_json(const SocialNetwork& net) {
    json doc;
    doc["features"] = net.features();
    json nodes = json::array();
    for (NodeIndex i = 0; i < net.node_count(); ++i)
        nodes.push_back({{"id", net.id_of(i)}, {"profile", net.profile(i)}});
    doc["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const auto& [a, b] : net.edges()) edges.push_back({a, b});
    doc["edges"] = std::move(edges);
    return doc;
}

void write_network(const std::string& path, const SocialNetwork& net) {
    write_text(path, network_to_json(net).dump(1) + "\n");
}

LabelsParse parse_labels(const std::string& text, const std::string& source) {
    LabelsParse out;
    std::vector<csv::Row> rows;
    try {
        rows = csv::parse(text, source);
    } catch (const ParseError& e) {
        out.issues.push_back({e.locus(), e.what()});
        return out;
    }
    if (rows.empty()) {
        out.issues.push_back({source + ":1", "missing header 'user_id,stranger_id,label'"});
        return out;
    }
    if (rows.front().fields != std::vector<std::string>{"user_id", "stranger_id", "label"}) {
        out.issues.push_back({source + ":" + std::to_string(rows.front().line),
                              "expected header 'user_id,stranger_id,label'"});
        return out;
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string locus = source + ":" + std::to_string(row.line);
        if (row.fields.size() != 3) {
            out.issues.push_back({locus, "expected 3 fields, got " + std::to_string(row.fields.size())});
            continue;
        }
        if (row.fields[0].empty() || row.fields[1].empty()) {
            out.issues.push_back({locus, "empty user or stranger id"});
            continue;
        }
        long long label = 0;
        try {
            label = csv::parse_int(row.fields[2], locus);
        } catch (const ParseError&) {
            out.issues.push_back({locus, "label '" + row.fields[2] + "' is not an integer"});
            continue;
        }
        if (label < 1 || label > 3) {
            out.issues.push_back({locus, "label " + std::to_string(label) + " outside {1,2,3}"});
            continue;
        }
        out.records.push_back({row.fields[0], row.fields[1], static_cast<int>(label)});
        out.lines.push_back(row.line);
    }
    return out;
}

std::vector<RiskLabelRecord> read_labels(const std::string& path) {
    auto parsed = parse_labels(read_text(path), path);
    if (!parsed.issues.empty()) throw ParseError(parsed.issues.front().locus, parsed.issues.front().message);
    std::set<RecordKey> seen;
    for (std::size_t i = 0; i < parsed.records.size(); ++i) {
        const auto& r = parsed.records[i];
        if (!seen.insert({r.user, r.stranger}).second)
            throw ParseError(path + ":" + std::to_string(parsed.lines[i]),
                             "duplicate label for (" + r.user + ", " + r.stranger + ")");
    }
    return parsed.records;
}

void write_labels(const std::string& path, const std::vector<RiskLabelRecord>& records) {
    std::ostringstream os;
    csv::write_row(os, {"user_id", "stranger_id", "label"});
    for (const auto& r : records) csv::write_row(os, {r.user, r.stranger, std::to_string(r.label)});
    write_text(path, os.str());
}

std::map<RecordKey, double> read_continuous_labels(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path + ":1", "missing header");
    csv::expect_header(rows.front(), {"user_id", "stranger_id", "value"}, path);
    std::map<RecordKey, double> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string locus = path + ":" + std::to_string(rows[r].line);
        const auto& f = rows[r].fields;
        if (f.size() != 3) throw ParseError(locus, "expected 3 fields");
        const double v = csv::parse_real(f[2], locus);
        if (!out.emplace(RecordKey{f[0], f[1]}, v).second) throw ParseError(locus, "duplicate entry");
    }
    return out;
}

void write_continuous_labels(const std::string& path, const std::map<RecordKey, double>& values) {
    std::ostringstream os;
    csv::write_row(os, {"user_id", "stranger_id", "value"});
    for (const auto& [key, v] : values) csv::write_row(os, {key.first, key.second, csv::format_real(v)});
    write_text(path, os.str());
}

} // namespace frisk::io
