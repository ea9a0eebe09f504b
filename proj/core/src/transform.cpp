#include "frisk/transform.hpp"

#include <algorithm>
#include <sstream>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"

namespace frisk {

std::string to_string(SfmKind kind) { return kind == SfmKind::friends ? "friends" : "strangers"; }

SfmKind sfm_kind_from_string(const std::string& s) {
    if (s == "friends") return SfmKind::friends;
    if (s == "strangers") return SfmKind::strangers;
    throw Error("unknown SFM kind '" + s + "'");
}

Sfm::Sfm(SfmKind kind, std::vector<std::string> features, std::vector<FrequencyVector> rows)
    : kind_(kind), features_(std::move(features)), rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end(), [](const FrequencyVector& a, const FrequencyVector& b) {
        return std::tie(a.owner, a.subject) < std::tie(b.owner, b.subject);
    });
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.values.size() != features_.size())
            throw Error("sfm row (" + r.owner + ", " + r.subject + "): width " + std::to_string(r.values.size()) +
                        " != feature count " + std::to_string(features_.size()));
        for (double v : r.values)
            if (!(v >= 0.0 && v <= 1.0))
                throw Error("sfm row (" + r.owner + ", " + r.subject + "): entry outside [0,1]");
        if (!index_.emplace(RecordKey{r.owner, r.subject}, i).second)
            throw Error("sfm: duplicate row (" + r.owner + ", " + r.subject + ")");
    }
}

std::optional<std::size_t> Sfm::find(const NodeId& owner, const NodeId& subject) const {
    auto it = index_.find({owner, subject});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const FrequencyVector& Sfm::at(const NodeId& owner, const NodeId& subject) const {
    auto pos = find(owner, subject);
    if (!pos) throw Error("sfm: no row for (" + owner + ", " + subject + ")");
    return rows_[*pos];
}

Eigen::MatrixXd Sfm::matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(features_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i)
        for (std::size_t f = 0; f < features_.size(); ++f)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows_[i].values[f];
    return m;
}

Sfm Sfm::subset(const std::vector<RecordKey>& keys) const {
    std::vector<FrequencyVector> picked;
    picked.reserve(keys.size());
    for (const auto& [owner, subject] : keys) picked.push_back(at(owner, subject));
    return Sfm(kind_, features_, std::move(picked));
}

namespace {

// Per-feature value counts over the friends of one owner.
class FriendCounts {
public:
    FriendCounts(const SocialNetwork& net, NodeIndex owner) : friends_(net.neighbors(owner).size()) {
        if (friends_ == 0)
            throw Error("owner '" + net.id_of(owner) + "' has no friends; frequencies are undefined");
        counts_.resize(net.feature_count());
        for (std::size_t f = 0; f < net.feature_count(); ++f) counts_[f].assign(net.categories(f).size(), 0);
        for (NodeIndex g : net.neighbors(owner))
            for (std::size_t f = 0; f < net.feature_count(); ++f) ++counts_[f][net.code(g, f)];
    }

    double frequency(std::size_t feature, std::uint32_t code) const {
        return static_cast<double>(counts_[feature][code]) / static_cast<double>(friends_);
    }

    std::vector<double> row(const SocialNetwork& net, NodeIndex subject) const {
        std::vector<double> out(net.feature_count());
        for (std::size_t f = 0; f < out.size(); ++f) out[f] = frequency(f, net.code(subject, f));
        return out;
    }

private:
    std::size_t friends_;
    std::vector<std::vector<std::size_t>> counts_;
};

} // namespace

double feature_frequency(const SocialNetwork& net, std::string_view owner,
                         std::string_view feature, std::string_view value) {
    const NodeIndex u = net.index_of(owner);
    auto f = net.feature_index(feature);
    if (!f) throw Error("unknown feature '" + std::string(feature) + "'");
    const auto friends = net.neighbors(u);
    if (friends.empty()) throw Error("owner '" + std::string(owner) + "' has no friends; frequency is undefined");
    std::size_t support = 0;
    for (NodeIndex g : friends)
        if (net.value(g, *f) == value) ++support;
    return static_cast<double>(support) / static_cast<double>(friends.size());
}

Sfm build_sfmf(const SocialNetwork& net, const std::set<NodeId>& owners) {
    std::vector<FrequencyVector> rows;
    for (const auto& owner : owners) {
        const NodeIndex u = net.index_of(owner);
        FriendCounts counts(net, u);
        for (NodeIndex f : net.neighbors(u)) rows.push_back({owner, net.id_of(f), counts.row(net, f)});
    }
    return Sfm(SfmKind::friends, net.features(), std::move(rows));
}

Sfm build_sfms(const SocialNetwork& net, const std::vector<RiskLabelRecord>& records) {
    std::map<NodeIndex, std::vector<NodeIndex>> by_user;
    for (const auto& r : records) by_user[net.index_of(r.user)].push_back(net.index_of(r.stranger));
    std::vector<FrequencyVector> rows;
    rows.reserve(records.size());
    for (const auto& [u, strangers] : by_user) {
        FriendCounts counts(net, u);
        for (NodeIndex s : strangers) rows.push_back({net.id_of(u), net.id_of(s), counts.row(net, s)});
    }
    return Sfm(SfmKind::strangers, net.features(), std::move(rows));
}

void write_sfm_csv(const std::string& path, const Sfm& sfm) {
    std::ostringstream os;
    std::vector<std::string> header{"owner_id", "subject_id"};
    header.insert(header.end(), sfm.features().begin(), sfm.features().end());
    csv::write_row(os, header);
    for (const auto& r : sfm.rows()) {
        std::vector<std::string> fields{r.owner, r.subject};
        for (double v : r.values) fields.push_back(csv::format_fixed9(v));
        csv::write_row(os, fields);
    }
    io::write_text(path, os.str());
}

Sfm read_sfm_csv(const std::string& path, SfmKind kind) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path + ":1", "missing header");
    const auto& header = rows.front().fields;
    if (header.size() < 2 || header[0] != "owner_id" || header[1] != "subject_id")
        throw ParseError(path + ":1", "expected header 'owner_id,subject_id,<features...>'");
    std::vector<std::string> features(header.begin() + 2, header.end());
    std::vector<FrequencyVector> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string locus = path + ":" + std::to_string(rows[r].line);
        const auto& f = rows[r].fields;
        if (f.size() != header.size())
            throw ParseError(locus, "expected " + std::to_string(header.size()) + " fields");
        FrequencyVector fv{f[0], f[1], {}};
        for (std::size_t c = 2; c < f.size(); ++c) {
            const double v = csv::parse_real(f[c], locus);
            if (!(v >= 0.0 && v <= 1.0)) throw ParseError(locus, "entry '" + f[c] + "' outside [0,1]");
            fv.values.push_back(v);
        }
        out.push_back(std::move(fv));
    }
    try {
        return Sfm(kind, std::move(features), std::move(out));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(path, e.what());
    }
}

} // namespace frisk
