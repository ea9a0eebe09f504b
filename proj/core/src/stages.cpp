#include "frisk/stages.hpp"

#include "frisk/log.hpp"

namespace frisk {

std::set<NodeId> labeling_users(const std::vector<RiskLabelRecord>& records) {
    std::set<NodeId> out;
    for (const auto& r : records) out.insert(r.user);
    return out;
}

namespace {

template <class F>
void stage(const char* name, F&& f, const StageResults& r, const StageCallback& after) {
    try {
        log::debug(std::string("stage ") + name);
        f();
        if (after) after(name, r);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

} // namespace

StageResults run_stages(const LabeledDataset& data, const PipelineConfig& cfg, const StageOverrides& overrides,
                        const std::set<RecordKey>& excluded, const StageCallback& after_stage) {
    StageResults r;
    const auto& net = data.net;

    stage("transform", [&] {
        validate_records(net, data.records);
        r.sfmf = build_sfmf(net, labeling_users(data.records));
        r.sfms = build_sfms(net, data.records);
    }, r, after_stage);

    stage("cluster", [&] {
        r.friend_clusters = overrides.friend_clusters
                                ? *overrides.friend_clusters
                                : run_clustering(r.sfmf, cfg.friend_clustering.algorithm, cfg.friend_clustering.k,
                                                 cfg.friend_seed());
        r.stranger_clusters = overrides.stranger_clusters
                                  ? *overrides.stranger_clusters
                                  : run_clustering(r.sfms, cfg.stranger_clustering.algorithm,
                                                   cfg.stranger_clustering.k, cfg.stranger_seed());
    }, r, after_stage);

    std::vector<RiskLabelRecord> training;
    stage("baseline", [&] {
        for (const auto& rec : first_group(data.records, net)) {
            r.first_group.insert({rec.user, rec.stranger});
            if (!excluded.count({rec.user, rec.stranger})) training.push_back(rec);
        }
        r.design = build_design(net, r.sfms, data.records, cfg.baseline.design);
        if (overrides.baseline) {
            check_model_columns(*overrides.baseline, r.design.columns);
            r.model = *overrides.baseline;
        } else {
            if (training.empty()) throw Error("no first-group records to train on");
            const Design train = build_design(net, r.sfms, training, cfg.baseline.design);
            std::vector<int> labels;
            labels.reserve(training.size());
            for (const auto& rec : training) labels.push_back(rec.label);
            r.model = fit_multinomial(train.x, labels, train.columns,
                                      {cfg.baseline.ridge, cfg.baseline.max_iter, cfg.baseline.reference_label});
            if (!r.model.converged) log::warn("baseline fit did not converge in " + std::to_string(r.model.iterations) + " iterations");
        }
        r.baselines = baseline_labels(r.model, r.design);
    }, r, after_stage);

    stage("impact", [&] {
        r.items = labeled_strangers(data, r.sfms, r.stranger_clusters, r.baselines, r.first_group,
                                    cfg.impact.ps_formula, excluded);
        std::vector<LabeledStranger> eligible;
        for (const auto& item : r.items) {
            const RecordKey key{item.user, item.stranger};
            if (impact_eligible(r.first_group, key, cfg) && !excluded.count(key)) eligible.push_back(item);
        }
        r.equations =
            build_equations(net, eligible, r.friend_clusters, r.stranger_clusters, cfg.impact.mode);
        if (r.equations.dropped_zero_past > 0)
            log::info(std::to_string(r.equations.dropped_zero_past) + " equations with zero Past dropped");
        r.impacts = solve_impacts(r.equations, cfg.impact.mode);
    }, r, after_stage);

    stage("label", [&] {
        r.report = build_friend_report(r.impacts, r.friend_clusters, cfg.thresholds);
    }, r, after_stage);
    return r;
}

std::vector<LabeledStranger> labeled_strangers(const LabeledDataset& data, const Sfm& sfms,
                                               const ClusterAssignment& stranger_clusters,
                                               const std::vector<BaselineLabel>& baselines,
                                               const std::set<RecordKey>& first_group, PsFormula formula,
                                               const std::set<RecordKey>& excluded) {
    if (baselines.size() != data.records.size()) throw Error("baseline count does not match record count");
    std::vector<PeerLabel> peers;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        const RecordKey key{rec.user, rec.stranger};
        if (!first_group.count(key) || excluded.count(key)) continue;
        peers.push_back({rec.user, rec.stranger, data.response_label(rec), baselines[i].value});
    }
    const PastCalculator past(data.net, sfms, stranger_clusters, std::move(peers), formula);
    std::vector<LabeledStranger> out;
    out.reserve(data.records.size());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const auto& rec = data.records[i];
        out.push_back({rec.user, rec.stranger, data.response_label(rec), baselines[i].value,
                       past(rec.user, rec.stranger).value});
    }
    return out;
}

bool impact_eligible(const std::set<RecordKey>& first_group, const RecordKey& key, const PipelineConfig& cfg) {
    return cfg.impact.include_first_group || !first_group.count(key);
}

} // namespace frisk
