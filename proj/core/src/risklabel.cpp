#include "frisk/risklabel.hpp"

#include <sstream>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"

namespace frisk {

using nlohmann::json;

std::string to_string(FriendRisk r) {
    switch (r) {
        case FriendRisk::not_risky: return "not risky";
        case FriendRisk::risky: return "risky";
        case FriendRisk::very_risky: return "very risky";
    }
    return "?";
}

namespace {

FriendRisk friend_risk_from_string(const std::string& s) {
    if (s == "not risky") return FriendRisk::not_risky;
    if (s == "risky") return FriendRisk::risky;
    if (s == "very risky") return FriendRisk::very_risky;
    throw Error("unknown friend risk label '" + s + "'");
}

std::string label_text(const std::optional<FriendRisk>& l) { return l ? to_string(*l) : "undetermined"; }

} // namespace

void validate_thresholds(const Thresholds& t) {
    if (!(t.x >= 0.0 && t.x <= 1.0)) throw Error("threshold x must lie in [0, 1]");
    if (!(t.x < t.y)) throw Error("threshold x must be smaller than threshold y");
}

std::optional<SignShare> impact_sign_percentages(const ImpactMatrix& m, int friend_cluster) {
    std::size_t negative = 0, total = 0;
    for (const auto& [key, entry] : m.entries) {
        if (key.first != friend_cluster || !entry.estimable) continue;
        auto g = m.groups.find(key.second);
        if (g == m.groups.end() || !g->second.significant) continue;
        ++total;
        if (entry.value < 0.0) ++negative;
    }
    if (total == 0) return std::nullopt;
    SignShare s;
    s.n_significant = total;
    s.im_minus = static_cast<double>(negative) / static_cast<double>(total);
    s.im_plus = static_cast<double>(total - negative) / static_cast<double>(total);
    return s;
}

FriendRisk assign_friend_label(double im_minus, const Thresholds& t) {
    validate_thresholds(t);
    if (im_minus < t.x) return FriendRisk::not_risky;
    if (im_minus < t.y) return FriendRisk::risky;
    return FriendRisk::very_risky;
}

const ClusterRisk* FriendRiskReport::cluster(int id) const {
    for (const auto& c : clusters)
        if (c.friend_cluster == id) return &c;
    return nullptr;
}

FriendRiskReport build_friend_report(const ImpactMatrix& m, const ClusterAssignment& friend_clusters,
                                     const Thresholds& t) {
    validate_thresholds(t);
    FriendRiskReport report;
    report.thresholds = t;
    std::map<int, std::optional<FriendRisk>> labels;
    for (int c = 1; c <= friend_clusters.k(); ++c) {
        ClusterRisk cr;
        cr.friend_cluster = c;
        cr.share = impact_sign_percentages(m, c);
        if (cr.share) cr.label = assign_friend_label(cr.share->im_minus, t);
        labels[c] = cr.label;
        report.clusters.push_back(cr);
    }
    for (std::size_t i = 0; i < friend_clusters.keys().size(); ++i) {
        const auto& [user, f] = friend_clusters.keys()[i];
        const int c = friend_clusters.ids()[i];
        report.friends.push_back({user, f, c, labels[c]});
    }
    return report;
}

json report_to_json(const FriendRiskReport& r) {
    json clusters = json::array();
    for (const auto& c : r.clusters) {
        json j{{"friend_cluster", c.friend_cluster}, {"label", label_text(c.label)}};
        if (c.share) {
            j["im_plus"] = c.share->im_plus;
            j["im_minus"] = c.share->im_minus;
            j["n_significant"] = c.share->n_significant;
        } else {
            j["im_plus"] = nullptr;
            j["im_minus"] = nullptr;
            j["n_significant"] = 0;
        }
        clusters.push_back(std::move(j));
    }
    json friends = json::array();
    for (const auto& f : r.friends)
        friends.push_back({{"user_id", f.user},
                           {"friend_id", f.friend_id},
                           {"friend_cluster", f.friend_cluster},
                           {"label", label_text(f.label)}});
    return json{{"format", "frisk.friend_risk_report"},
                {"thresholds", {{"x", r.thresholds.x}, {"y", r.thresholds.y}}},
                {"clusters", std::move(clusters)},
                {"friends", std::move(friends)}};
}

FriendRiskReport report_from_json(const json& doc) {
    try {
        if (doc.value("format", "") != "frisk.friend_risk_report") throw Error("not a friend risk report");
        FriendRiskReport r;
        r.thresholds.x = doc.at("thresholds").at("x").get<double>();
        r.thresholds.y = doc.at("thresholds").at("y").get<double>();
        auto parse_label = [](const std::string& s) -> std::optional<FriendRisk> {
            if (s == "undetermined") return std::nullopt;
            return friend_risk_from_string(s);
        };
        for (const auto& c : doc.at("clusters")) {
            ClusterRisk cr;
            cr.friend_cluster = c.at("friend_cluster").get<int>();
            cr.label = parse_label(c.at("label").get<std::string>());
            if (!c.at("im_minus").is_null())
                cr.share = SignShare{c.at("im_plus").get<double>(), c.at("im_minus").get<double>(),
                                     c.at("n_significant").get<std::size_t>()};
            r.clusters.push_back(cr);
        }
        for (const auto& f : doc.at("friends"))
            r.friends.push_back({f.at("user_id").get<std::string>(), f.at("friend_id").get<std::string>(),
                                 f.at("friend_cluster").get<int>(), parse_label(f.at("label").get<std::string>())});
        return r;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed friend risk report: ") + e.what());
    }
}

void write_report_csv(const std::string& cluster_path, const std::string& friends_path, const FriendRiskReport& r) {
    std::ostringstream cs;
    csv::write_row(cs, {"friend_cluster", "im_plus", "im_minus", "n_significant", "label"});
    for (const auto& c : r.clusters)
        csv::write_row(cs, {std::to_string(c.friend_cluster), c.share ? csv::format_real(c.share->im_plus) : "",
                            c.share ? csv::format_real(c.share->im_minus) : "",
                            std::to_string(c.share ? c.share->n_significant : 0), label_text(c.label)});
    io::write_text(cluster_path, cs.str());

    std::ostringstream fs;
    csv::write_row(fs, {"user_id", "friend_id", "friend_cluster", "label"});
    for (const auto& f : r.friends)
        csv::write_row(fs, {f.user, f.friend_id, std::to_string(f.friend_cluster), label_text(f.label)});
    io::write_text(friends_path, fs.str());
}

} // namespace frisk
