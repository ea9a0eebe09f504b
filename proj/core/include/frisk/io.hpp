#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "frisk/network.hpp"

namespace frisk::io {

/// Network file:
///   {"features": [...], "nodes": [{"id": ..., "profile": {...}}], "edges": [[a, b], ...]}
/// Violations throw ParseError with a JSON-path locus such as "nodes[4].profile".
SocialNetwork parse_network(const nlohmann::json& doc, const std::string& source);
SocialNetwork read_network(const std::string& path);
nlohmann::json network_to_json(const SocialNetwork& net);
void write_network(const std::string& path, const SocialNetwork& net);

struct Issue {
    std::string locus;
    std::string message;
};

struct LabelsParse {
    std::vector<RiskLabelRecord> records;
    std::vector<std::size_t> lines;  ///< CSV line per record
    std::vector<Issue> issues;
};

/// Labels CSV with header `user_id,stranger_id,label`. Collects every row
/// error instead of stopping at the first.
LabelsParse parse_labels(const std::string& text, const std::string& source);
/// Throws on the first issue.
std::vector<RiskLabelRecord> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<RiskLabelRecord>& records);

/// Real-valued shadow labels: `user_id,stranger_id,value`.
std::map<RecordKey, double> read_continuous_labels(const std::string& path);
void write_continuous_labels(const std::string& path, const std::map<RecordKey, double>& values);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

} // namespace frisk::io
