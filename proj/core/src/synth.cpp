#include "frisk/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "frisk/error.hpp"
#include "frisk/random.hpp"
#include "frisk/transform.hpp"

namespace frisk {

using nlohmann::json;

std::string to_string(LabelRounding r) { return r == LabelRounding::continuous ? "continuous" : "discrete"; }

LabelRounding label_rounding_from_string(const std::string& s) {
    if (s == "continuous") return LabelRounding::continuous;
    if (s == "discrete") return LabelRounding::discrete;
    throw Error("unknown rounding '" + s + "' (expected continuous or discrete)");
}

void validate(const SynthConfig& c) {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw Error(std::string("synth config: ") + name + " must be positive");
    };
    positive(c.n_users, "n_users");
    positive(c.friends_min, "friends_min");
    positive(c.strangers_per_user, "strangers_per_user");
    positive(c.n_features, "n_features");
    positive(c.categories_per_feature, "categories_per_feature");
    positive(c.n_friend_clusters_true, "n_friend_clusters_true");
    positive(c.n_stranger_clusters_true, "n_stranger_clusters_true");
    positive(c.max_mutual_friends, "max_mutual_friends");
    if (c.n_visibility_features < 0) throw Error("synth config: n_visibility_features must be non-negative");
    if (c.friends_max < c.friends_min) throw Error("synth config: friends_max is below friends_min");
    if (c.max_mutual_friends > c.friends_min)
        throw Error("synth config: max_mutual_friends exceeds friends_min; a stranger cannot share more friends "
                    "with a user than the user has");
    if (!(c.homophily >= 0.0 && c.homophily <= 1.0)) throw Error("synth config: homophily must lie in [0, 1]");
    if (!(c.visible_probability >= 0.0 && c.visible_probability <= 1.0))
        throw Error("synth config: visible_probability must lie in [0, 1]");
    if (!(c.first_group_fraction >= 0.0 && c.first_group_fraction <= 1.0))
        throw Error("synth config: first_group_fraction must lie in [0, 1]");
    if (c.first_group_fraction < 1.0 && c.max_mutual_friends < 2)
        throw Error("synth config: max_mutual_friends must be at least 2 unless every stranger is first-group");
    if (!(c.impact_scale >= 0.0) || !(c.label_noise_sigma >= 0.0) || !(c.taste >= 0.0) || !(c.baseline_scale >= 0.0))
        throw Error("synth config: scales and sigma must be non-negative");
}

json synth_config_to_json(const SynthConfig& c) {
    return json{{"n_users", c.n_users},
                {"friends_min", c.friends_min},
                {"friends_max", c.friends_max},
                {"strangers_per_user", c.strangers_per_user},
                {"n_features", c.n_features},
                {"categories_per_feature", c.categories_per_feature},
                {"n_visibility_features", c.n_visibility_features},
                {"visible_probability", c.visible_probability},
                {"homophily", c.homophily},
                {"n_friend_clusters_true", c.n_friend_clusters_true},
                {"n_stranger_clusters_true", c.n_stranger_clusters_true},
                {"impact_scale", c.impact_scale},
                {"label_noise_sigma", c.label_noise_sigma},
                {"rounding", to_string(c.rounding)},
                {"first_group_fraction", c.first_group_fraction},
                {"max_mutual_friends", c.max_mutual_friends},
                {"taste", c.taste},
                {"baseline_scale", c.baseline_scale},
                {"mode", to_string(c.mode)},
                {"ps_formula", to_string(c.ps_formula)},
                {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& doc) {
    SynthConfig c;
    if (!doc.is_object()) throw Error("synth config: expected an object");
    const json defaults = synth_config_to_json(c);
    for (const auto& [key, _] : doc.items())
        if (!defaults.contains(key)) throw Error("synth config: unknown key '" + key + "'");
    try {
        c.n_users = doc.value("n_users", c.n_users);
        c.friends_min = doc.value("friends_min", c.friends_min);
        c.friends_max = doc.value("friends_max", c.friends_max);
        c.strangers_per_user = doc.value("strangers_per_user", c.strangers_per_user);
        c.n_features = doc.value("n_features", c.n_features);
        c.categories_per_feature = doc.value("categories_per_feature", c.categories_per_feature);
        c.n_visibility_features = doc.value("n_visibility_features", c.n_visibility_features);
        c.visible_probability = doc.value("visible_probability", c.visible_probability);
        c.homophily = doc.value("homophily", c.homophily);
        c.n_friend_clusters_true = doc.value("n_friend_clusters_true", c.n_friend_clusters_true);
        c.n_stranger_clusters_true = doc.value("n_stranger_clusters_true", c.n_stranger_clusters_true);
        c.impact_scale = doc.value("impact_scale", c.impact_scale);
        c.label_noise_sigma = doc.value("label_noise_sigma", c.label_noise_sigma);
        if (doc.contains("rounding")) c.rounding = label_rounding_from_string(doc.at("rounding").get<std::string>());
        c.first_group_fraction = doc.value("first_group_fraction", c.first_group_fraction);
        c.max_mutual_friends = doc.value("max_mutual_friends", c.max_mutual_friends);
        c.taste = doc.value("taste", c.taste);
        c.baseline_scale = doc.value("baseline_scale", c.baseline_scale);
        if (doc.contains("mode")) c.mode = impact_mode_from_string(doc.at("mode").get<std::string>());
        if (doc.contains("ps_formula")) c.ps_formula = ps_formula_from_string(doc.at("ps_formula").get<std::string>());
        c.seed = doc.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw Error(std::string("synth config: ") + e.what());
    }
    validate(c);
    return c;
}

namespace {

using Mask = std::vector<bool>;

std::vector<std::string> visibility_names(int n) {
    static const char* known[] = {"friendlist_visibility", "photos_visibility", "wall_visibility"};
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i)
        out.push_back(i < 3 ? known[i] : fmt::format("setting{:02}_visibility", i + 1));
    return out;
}

int hamming(const Mask& a, const Mask& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

/// `count` masks of weight floor(f/2) (at least 1), pairwise as far apart as
/// a greedy pass over a shuffled candidate pool allows.
std::vector<Mask> pick_masks(int count, int f, Rng& rng) {
    const int weight = std::max(1, f / 2);
    std::vector<Mask> pool;
    if (f <= 16) {
        for (std::uint32_t bits = 0; bits < (1u << f); ++bits)
            if (std::popcount(bits) == weight) {
                Mask m(static_cast<std::size_t>(f));
                for (int i = 0; i < f; ++i) m[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
                pool.push_back(std::move(m));
            }
    } else {
        for (int t = 0; t < 4096; ++t) {
            std::vector<int> idx(static_cast<std::size_t>(f));
            for (int i = 0; i < f; ++i) idx[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < weight; ++i)
                std::swap(idx[static_cast<std::size_t>(i)],
                          idx[static_cast<std::size_t>(i) + uniform_index(rng, static_cast<std::size_t>(f - i))]);
            Mask m(static_cast<std::size_t>(f));
            for (int i = 0; i < weight; ++i) m[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = true;
            if (std::find(pool.begin(), pool.end(), m) == pool.end()) pool.push_back(std::move(m));
        }
    }
    if (pool.size() < static_cast<std::size_t>(count))
        throw Error(fmt::format("synth config: {} types need more distinct feature masks than {} features allow",
                                count, f));
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[uniform_index(rng, i)]);
    for (int need = f; need >= 0; --need) {
        std::vector<Mask> chosen;
        for (const auto& m : pool) {
            if (std::all_of(chosen.begin(), chosen.end(), [&](const Mask& c) { return hamming(c, m) >= need; }))
                chosen.push_back(m);
            if (chosen.size() == static_cast<std::size_t>(count)) return chosen;
        }
    }
    throw Error("synth: mask selection failed");
}

struct Profile {
    std::vector<int> cats;
    std::vector<bool> visible;
};

} // namespace

SynthWorld generate_world(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(derive_seed(cfg.seed, 0x5eed));
    const int f = cfg.n_features;
    const int c = cfg.categories_per_feature;

    std::vector<std::string> cat_features;
    for (int i = 0; i < f; ++i) cat_features.push_back(fmt::format("attr{:02}", i + 1));
    const auto vis_features = visibility_names(cfg.n_visibility_features);
    std::vector<std::string> features = cat_features;
    features.insert(features.end(), vis_features.begin(), vis_features.end());

    const auto friend_masks = pick_masks(cfg.n_friend_clusters_true, f, rng);
    const auto stranger_masks = pick_masks(cfg.n_stranger_clusters_true, f, rng);
    const double q_in = std::min(1.0, 2.0 * cfg.homophily);
    const double q_out = std::max(0.0, 2.0 * cfg.homophily - 1.0);

    auto draw_user = [&] {
        Profile p;
        for (int i = 0; i < f; ++i) p.cats.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(c))));
        for (int i = 0; i < cfg.n_visibility_features; ++i) p.visible.push_back(uniform01(rng) < cfg.visible_probability);
        return p;
    };
    auto draw_related = [&](const Profile& user, const Mask& mask) {
        Profile p;
        for (int i = 0; i < f; ++i) {
            const double q = mask[static_cast<std::size_t>(i)] ? q_in : q_out;
            const bool copy = uniform01(rng) < q;
            const int fresh = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(c)));
            p.cats.push_back(copy ? user.cats[static_cast<std::size_t>(i)] : fresh);
        }
        for (int i = 0; i < cfg.n_visibility_features; ++i) p.visible.push_back(uniform01(rng) < cfg.visible_probability);
        return p;
    };
    auto to_spec = [&](NodeId id, const Profile& p) {
        NodeSpec spec{std::move(id), {}};
        for (int i = 0; i < f; ++i)
            spec.profile[cat_features[static_cast<std::size_t>(i)]] = fmt::format("c{}", p.cats[static_cast<std::size_t>(i)] + 1);
        for (int i = 0; i < cfg.n_visibility_features; ++i)
            spec.profile[vis_features[static_cast<std::size_t>(i)]] =
                std::string(p.visible[static_cast<std::size_t>(i)] ? kVisible : kHidden);
        return spec;
    };

    const int uw = static_cast<int>(std::to_string(cfg.n_users).size());
    const int fw = static_cast<int>(std::to_string(cfg.friends_max).size());
    const int sw = static_cast<int>(std::to_string(cfg.strangers_per_user).size());

    std::vector<NodeSpec> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<RecordKey> friend_keys, stranger_keys;
    std::vector<int> friend_ids, stranger_ids;
    PlantedTruth truth;
    truth.mode = cfg.mode;
    truth.ps_formula = cfg.ps_formula;

    for (int u = 0; u < cfg.n_users; ++u) {
        const NodeId uid = fmt::format("u{:0{}}", u + 1, uw);
        const Profile up = draw_user();
        nodes.push_back(to_spec(uid, up));

        const int n_friends =
            cfg.friends_min + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.friends_max - cfg.friends_min + 1)));
        std::vector<NodeId> friends;
        for (int j = 0; j < n_friends; ++j) {
            const NodeId fid = fmt::format("{}_f{:0{}}", uid, j + 1, fw);
            const int type = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.n_friend_clusters_true)));
            nodes.push_back(to_spec(fid, draw_related(up, friend_masks[static_cast<std::size_t>(type)])));
            edges.emplace_back(uid, fid);
            friend_keys.emplace_back(uid, fid);
            friend_ids.push_back(type + 1);
            friends.push_back(fid);
        }

        for (int k = 0; k < cfg.n_stranger_clusters_true; ++k)
            truth.taste[{uid, k + 1}] = uniform01(rng) < 0.5 ? -cfg.taste : cfg.taste;

        for (int k = 0; k < cfg.strangers_per_user; ++k) {
            const NodeId sid = fmt::format("{}_s{:0{}}", uid, k + 1, sw);
            const int type = k % cfg.n_stranger_clusters_true;
            nodes.push_back(to_spec(sid, draw_related(up, stranger_masks[static_cast<std::size_t>(type)])));
            int m = 1;
            if (uniform01(rng) >= cfg.first_group_fraction)
                m = 2 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cfg.max_mutual_friends - 1)));
            std::vector<std::size_t> pick(friends.size());
            for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
            for (int i = 0; i < m; ++i) {
                const std::size_t j = static_cast<std::size_t>(i) + uniform_index(rng, pick.size() - static_cast<std::size_t>(i));
                std::swap(pick[static_cast<std::size_t>(i)], pick[j]);
                edges.emplace_back(friends[pick[static_cast<std::size_t>(i)]], sid);
            }
            stranger_keys.emplace_back(uid, sid);
            stranger_ids.push_back(type + 1);
        }
    }

    SynthWorld world;
    world.net = SocialNetwork(features, std::move(nodes), edges);
    world.labeled = stranger_keys;
    std::sort(world.labeled.begin(), world.labeled.end());

    truth.friend_clusters =
        ClusterAssignment(SfmKind::friends, cfg.n_friend_clusters_true, std::move(friend_keys), std::move(friend_ids));
    truth.stranger_clusters = ClusterAssignment(SfmKind::strangers, cfg.n_stranger_clusters_true,
                                                std::move(stranger_keys), std::move(stranger_ids));
    for (int i = 1; i <= cfg.n_friend_clusters_true; ++i)
        for (int j = 1; j <= cfg.n_stranger_clusters_true; ++j)
            truth.impacts[{i, j}] = cfg.impact_scale * (2.0 * uniform01(rng) - 1.0);

    auto& model = truth.baseline;
    for (const auto& name : features) model.feature_names.push_back("freq:" + name);
    for (const auto& name : vis_features) model.feature_names.push_back("visible:" + name);
    const auto q = static_cast<Eigen::Index>(model.feature_names.size()) + 1;
    model.reference_label = 2;
    model.classes = {1, 3};
    model.params = Eigen::MatrixXd::Zero(2, q);
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index j = 1; j < q; ++j) model.params(r, j) = normal(rng, 0.0, cfg.baseline_scale);
    model.std_errors = Eigen::MatrixXd::Constant(2, q, std::numeric_limits<double>::quiet_NaN());
    model.converged = true;

    world.truth = std::move(truth);
    return world;
}

SocialNetwork generate_network(const SynthConfig& cfg) { return generate_world(cfg).net; }

double planted_label(double baseline, double past, const std::map<int, int>& multiplicity,
                     const std::map<int, double>& impacts, ImpactMode mode) {
    double value = baseline;
    for (const auto& [fc, count] : multiplicity) {
        auto it = impacts.find(fc);
        if (it == impacts.end()) continue;
        const double weight = mode == ImpactMode::single ? 1.0 : static_cast<double>(count);
        value += it->second * weight * past;
    }
    return value;
}

SynthLabels generate_labels(const SocialNetwork& net, const PlantedTruth& truth,
                            const std::vector<RecordKey>& labeled, const SynthConfig& cfg) {
    std::vector<RiskLabelRecord> records;
    records.reserve(labeled.size());
    for (const auto& [u, s] : labeled) records.push_back({u, s, 2});
    const Sfm sfms = build_sfms(net, records);
    const Design design = build_design(net, sfms, records, DesignOptions{});
    check_model_columns(truth.baseline, design.columns);
    const auto baselines = baseline_labels(truth.baseline, design);

    Rng rng(derive_seed(cfg.seed, 0x1abe1));
    std::vector<double> noise(records.size(), 0.0);
    if (cfg.label_noise_sigma > 0.0)
        for (auto& e : noise) e = normal(rng, 0.0, cfg.label_noise_sigma);

    SynthLabels out;
    std::vector<std::size_t> mf_count(records.size());
    auto finish = [&](std::size_t i, double value) {
        if (value < 1.0 || value > 3.0) ++out.clamped;
        value = std::clamp(value, 1.0, 3.0);
        const RecordKey key{records[i].user, records[i].stranger};
        records[i].label = static_cast<int>(std::lround(value));
        if (cfg.rounding == LabelRounding::continuous) out.continuous[key] = value;
        return cfg.rounding == LabelRounding::continuous ? value : static_cast<double>(records[i].label);
    };

    std::vector<PeerLabel> peers;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const RecordKey key{r.user, r.stranger};
        out.baseline[key] = baselines[i].value;
        out.noise[key] = noise[i];
        mf_count[i] = mutual_friend_indices(net, net.index_of(r.user), net.index_of(r.stranger)).size();
        if (mf_count[i] != 1) continue;
        const double taste = truth.taste.at({r.user, truth.stranger_clusters.at(r.user, r.stranger)});
        const double label = finish(i, baselines[i].value + taste + noise[i]);
        out.past[key] = 0.0;
        peers.push_back({r.user, r.stranger, label, baselines[i].value});
    }

    const PastCalculator past(net, sfms, truth.stranger_clusters, std::move(peers), truth.ps_formula);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (mf_count[i] == 1) continue;
        const auto& r = records[i];
        const int sc = truth.stranger_clusters.at(r.user, r.stranger);
        const double p = past(r.user, r.stranger).value;
        std::map<int, int> multiplicity;
        for (NodeIndex m : mutual_friend_indices(net, net.index_of(r.user), net.index_of(r.stranger)))
            ++multiplicity[truth.friend_clusters.at(r.user, net.id_of(m))];
        std::map<int, double> impacts;
        for (const auto& [fc, _] : multiplicity)
            if (auto it = truth.impacts.find({fc, sc}); it != truth.impacts.end()) impacts[fc] = it->second;
        out.past[{r.user, r.stranger}] = p;
        finish(i, planted_label(baselines[i].value, p, multiplicity, impacts, truth.mode) + noise[i]);
    }
    out.records = std::move(records);
    return out;
}

SynthDataset generate(const SynthConfig& cfg) {
    SynthWorld world = generate_world(cfg);
    SynthDataset out;
    out.labels = generate_labels(world.net, world.truth, world.labeled, cfg);
    out.data.net = std::move(world.net);
    out.data.records = out.labels.records;
    out.data.continuous = out.labels.continuous;
    out.truth = std::move(world.truth);
    return out;
}

RecoveryError recovery_error(const PlantedTruth& truth, const ImpactMatrix& estimated) {
    RecoveryError out;
    double ss = 0.0;
    for (const auto& [key, entry] : estimated.entries) {
        auto it = truth.impacts.find(key);
        if (it == truth.impacts.end())
            throw Error(fmt::format("index mismatch: estimated impact ({}, {}) has no planted counterpart", key.first,
                                    key.second));
        if (!entry.estimable) continue;
        const double err = std::abs(entry.value - it->second);
        out.entries.push_back({key.first, key.second, it->second, entry.value, err});
        out.sup_norm = std::max(out.sup_norm, err);
        ss += err * err;
    }
    if (!out.entries.empty()) out.rmse = std::sqrt(ss / static_cast<double>(out.entries.size()));
    return out;
}

namespace {

json assignment_to_json(const ClusterAssignment& a) {
    json rows = json::array();
    for (std::size_t i = 0; i < a.keys().size(); ++i)
        rows.push_back(json::array({a.keys()[i].first, a.keys()[i].second, a.ids()[i]}));
    return json{{"k", a.k()}, {"rows", std::move(rows)}};
}

ClusterAssignment assignment_from_json(const json& j, SfmKind kind) {
    std::vector<RecordKey> keys;
    std::vector<int> ids;
    for (const auto& row : j.at("rows")) {
        keys.emplace_back(row.at(0).get<std::string>(), row.at(1).get<std::string>());
        ids.push_back(row.at(2).get<int>());
    }
    return ClusterAssignment(kind, j.at("k").get<int>(), std::move(keys), std::move(ids));
}

} // namespace

json truth_to_json(const PlantedTruth& t) {
    json impacts = json::array();
    for (const auto& [key, v] : t.impacts)
        impacts.push_back({{"friend_cluster", key.first}, {"stranger_cluster", key.second}, {"value", v}});
    json taste = json::array();
    for (const auto& [key, v] : t.taste) taste.push_back(json::array({key.first, key.second, v}));
    return json{{"format", "frisk.planted_truth"},
                {"format_version", 1},
                {"mode", to_string(t.mode)},
                {"ps_formula", to_string(t.ps_formula)},
                {"impacts", std::move(impacts)},
                {"baseline", model_to_json(t.baseline)},
                {"friend_clusters", assignment_to_json(t.friend_clusters)},
                {"stranger_clusters", assignment_to_json(t.stranger_clusters)},
                {"taste", std::move(taste)}};
}

PlantedTruth truth_from_json(const json& doc) {
    try {
        if (doc.value("format", "") != "frisk.planted_truth") throw Error("not a planted-truth document");
        if (doc.at("format_version").get<int>() != 1)
            throw Error("planted-truth format version " + std::to_string(doc.at("format_version").get<int>()) +
                        " is not supported (this tool reads 1)");
        PlantedTruth t;
        t.mode = impact_mode_from_string(doc.at("mode").get<std::string>());
        t.ps_formula = ps_formula_from_string(doc.at("ps_formula").get<std::string>());
        for (const auto& e : doc.at("impacts"))
            t.impacts[{e.at("friend_cluster").get<int>(), e.at("stranger_cluster").get<int>()}] =
                e.at("value").get<double>();
        t.baseline = model_from_json(doc.at("baseline"));
        t.friend_clusters = assignment_from_json(doc.at("friend_clusters"), SfmKind::friends);
        t.stranger_clusters = assignment_from_json(doc.at("stranger_clusters"), SfmKind::strangers);
        for (const auto& e : doc.at("taste"))
            t.taste[{e.at(0).get<std::string>(), e.at(1).get<int>()}] = e.at(2).get<double>();
        return t;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed planted truth: ") + e.what());
    }
}

} // namespace frisk
