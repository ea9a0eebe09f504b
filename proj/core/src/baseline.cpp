#include "frisk/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "frisk/log.hpp"

namespace frisk {

using nlohmann::json;

Design build_design(const SocialNetwork& net, const Sfm& sfms,
                    const std::vector<RiskLabelRecord>& records, const DesignOptions& opts) {
    std::vector<std::string> all;
    std::vector<std::size_t> visibility;
    if (opts.frequencies)
        for (const auto& f : net.features()) all.push_back("freq:" + f);
    if (opts.visibility_indicators)
        for (std::size_t f = 0; f < net.feature_count(); ++f)
            if (is_visibility_feature(net.features()[f])) {
                all.push_back("visible:" + net.features()[f]);
                visibility.push_back(f);
            }
    if (opts.mutual_friend_count) all.push_back("mutual_friends");

    std::vector<std::size_t> keep;
    if (opts.columns.empty()) {
        for (std::size_t c = 0; c < all.size(); ++c) keep.push_back(c);
    } else {
        for (const auto& name : opts.columns) {
            auto it = std::find(all.begin(), all.end(), name);
            if (it == all.end()) throw Error("design: unknown column '" + name + "'");
            keep.push_back(static_cast<std::size_t>(it - all.begin()));
        }
    }

    Design d;
    for (std::size_t c : keep) d.columns.push_back(all[c]);
    d.x.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(keep.size()));
    std::vector<double> full(all.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const NodeIndex s = net.index_of(r.stranger);
        std::size_t c = 0;
        if (opts.frequencies) {
            const auto& row = sfms.at(r.user, r.stranger);
            for (double v : row.values) full[c++] = v;
        }
        for (std::size_t f : visibility) full[c++] = net.value(s, f) == kVisible ? 1.0 : 0.0;
        if (opts.mutual_friend_count)
            full[c++] = static_cast<double>(mutual_friend_indices(net, net.index_of(r.user), s).size());
        for (std::size_t k = 0; k < keep.size(); ++k)
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = full[keep[k]];
        d.keys.emplace_back(r.user, r.stranger);
    }
    return d;
}

double MultinomialModel::intercept(int label) const {
    for (int r = 0; r < 2; ++r)
        if (classes[static_cast<std::size_t>(r)] == label) return params(r, 0);
    if (label == reference_label) return 0.0;
    throw Error("label " + std::to_string(label) + " not in model");
}

Eigen::VectorXd MultinomialModel::coefficients(int label) const {
    for (int r = 0; r < 2; ++r)
        if (classes[static_cast<std::size_t>(r)] == label)
            return params.row(r).tail(static_cast<Eigen::Index>(width())).transpose();
    if (label == reference_label) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width()));
    throw Error("label " + std::to_string(label) + " not in model");
}

namespace {

std::array<int, 2> non_reference(int reference) {
    if (reference < 1 || reference > 3) throw Error("reference label must be 1, 2 or 3");
    std::array<int, 2> out{};
    int r = 0;
    for (int c = 1; c <= 3; ++c)
        if (c != reference) out[static_cast<std::size_t>(r++)] = c;
    return out;
}

// Row index of label y in params, or -1 for the reference label.
int class_row(const std::array<int, 2>& classes, int y) {
    return y == classes[0] ? 0 : y == classes[1] ? 1 : -1;
}

struct Evaluation {
    double value = 0.0;         // penalized
    double log_likelihood = 0.0;
    Eigen::VectorXd gradient;   // penalized, stacked
    Eigen::MatrixXd information; // unpenalized -Hessian (only when requested)
};

Evaluation evaluate(const Eigen::MatrixXd& x, const std::vector<int>& labels, const Eigen::MatrixXd& params,
                    const std::array<int, 2>& classes, double ridge, bool with_information) {
    const Eigen::Index n = x.rows();
    const Eigen::Index q = x.cols() + 1;
    Evaluation ev;
    ev.gradient = Eigen::VectorXd::Zero(2 * q);
    if (with_information) ev.information = Eigen::MatrixXd::Zero(2 * q, 2 * q);
    Eigen::VectorXd z(q);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(0) = 1.0;
        z.tail(q - 1) = x.row(i).transpose();
        const double e0 = params.row(0).dot(z);
        const double e1 = params.row(1).dot(z);
        const double m = std::max({0.0, e0, e1});
        const double w0 = std::exp(e0 - m), w1 = std::exp(e1 - m), wr = std::exp(-m);
        const double denom = w0 + w1 + wr;
        const double p0 = w0 / denom, p1 = w1 / denom;
        const int row = class_row(classes, labels[static_cast<std::size_t>(i)]);
        const double log_norm = m + std::log(denom);
        ev.log_likelihood += (row == 0 ? e0 : row == 1 ? e1 : 0.0) - log_norm;
        ev.gradient.segment(0, q) += ((row == 0 ? 1.0 : 0.0) - p0) * z;
        ev.gradient.segment(q, q) += ((row == 1 ? 1.0 : 0.0) - p1) * z;
        if (with_information) {
            const Eigen::MatrixXd zz = z * z.transpose();
            ev.information.block(0, 0, q, q) += p0 * (1.0 - p0) * zz;
            ev.information.block(q, q, q, q) += p1 * (1.0 - p1) * zz;
            ev.information.block(0, q, q, q) -= p0 * p1 * zz;
            ev.information.block(q, 0, q, q) -= p0 * p1 * zz;
        }
    }
    Eigen::VectorXd flat(2 * q);
    flat.segment(0, q) = params.row(0).transpose();
    flat.segment(q, q) = params.row(1).transpose();
    ev.value = ev.log_likelihood - 0.5 * ridge * flat.squaredNorm();
    ev.gradient -= ridge * flat;
    return ev;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, Eigen::Index q) {
    Eigen::MatrixXd params(2, q);
    params.row(0) = flat.segment(0, q).transpose();
    params.row(1) = flat.segment(q, q).transpose();
    return params;
}

void validate_labels(const std::vector<int>& labels, Eigen::Index rows) {
    if (static_cast<Eigen::Index>(labels.size()) != rows)
        throw Error("fit_multinomial: " + std::to_string(rows) + " rows but " + std::to_string(labels.size()) +
                    " labels");
    if (labels.empty()) throw Error("fit_multinomial: no observations");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 1 || labels[i] > 3)
            throw Error("fit_multinomial: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside {1,2,3}");
}

} // namespace

Objective multinomial_objective(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                const Eigen::MatrixXd& params, int reference_label, double ridge) {
    validate_labels(labels, x.rows());
    if (params.rows() != 2 || params.cols() != x.cols() + 1) throw Error("multinomial_objective: params shape");
    auto ev = evaluate(x, labels, params, non_reference(reference_label), ridge, false);
    return {ev.value, ev.gradient};
}

MultinomialModel fit_multinomial(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 std::vector<std::string> feature_names, const FitOptions& opts) {
    validate_labels(labels, x.rows());
    if (static_cast<Eigen::Index>(feature_names.size()) != x.cols())
        throw Error("fit_multinomial: " + std::to_string(feature_names.size()) + " feature names for " +
                    std::to_string(x.cols()) + " columns");
    if (!(opts.ridge >= 0.0)) throw Error("fit_multinomial: ridge must be non-negative");
    if (opts.max_iter < 1) throw Error("fit_multinomial: max_iter must be positive");
    const std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2 && opts.ridge == 0.0)
        throw Error("fit_multinomial: fewer than 2 distinct labels and no ridge; the model is undefined");

    MultinomialModel model;
    model.reference_label = opts.reference_label;
    model.classes = non_reference(opts.reference_label);
    model.feature_names = std::move(feature_names);
    model.ridge = opts.ridge;
    model.n_obs = labels.size();

    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (x.rows() > 0 && x.col(c).maxCoeff() == x.col(c).minCoeff()) {
            const std::string msg = "column '" + model.feature_names[static_cast<std::size_t>(c)] +
                                    "' has zero variance; its coefficient is determined by the ridge penalty";
            model.warnings.push_back(msg);
            log::warn(msg);
        }
    }

    const Eigen::Index q = x.cols() + 1;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * q);
    auto current = evaluate(x, labels, unflatten(theta, q), model.classes, opts.ridge, true);
    model.trace.push_back(current.value);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (current.gradient.lpNorm<Eigen::Infinity>() < 1e-10) break;
        Eigen::MatrixXd a = current.information;
        a.diagonal().array() += opts.ridge;
        Eigen::VectorXd step;
        double damping = 0.0;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd damped = a;
            damped.diagonal().array() += damping;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                step = ldlt.solve(current.gradient);
                if (step.allFinite()) break;
            }
            step.resize(0);
            damping = damping == 0.0 ? 1e-10 * std::max(1.0, a.diagonal().maxCoeff()) : damping * 10.0;
        }
        if (step.size() == 0) break;

        bool accepted = false;
        double t = 1.0;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            Eigen::VectorXd candidate = theta + t * step;
            auto next = evaluate(x, labels, unflatten(candidate, q), model.classes, opts.ridge, true);
            // Close to the optimum the gain drops below the rounding error of
            // the summed log-likelihood; a smaller gradient decides then.
            const double slack = 1e-12 * std::max(1.0, std::abs(current.value));
            const bool better = next.value >= current.value ||
                                (next.value >= current.value - slack &&
                                 next.gradient.lpNorm<Eigen::Infinity>() < current.gradient.lpNorm<Eigen::Infinity>());
            if (std::isfinite(next.value) && better) {
                const bool stalled = next.value - current.value <= 1e-15 * std::abs(current.value) &&
                                     next.gradient.lpNorm<Eigen::Infinity>() >=
                                         current.gradient.lpNorm<Eigen::Infinity>();
                theta = std::move(candidate);
                current = std::move(next);
                model.trace.push_back(current.value);
                accepted = !stalled;
                break;
            }
        }
        model.iterations = iter + 1;
        if (!accepted) break;
    }

    model.params = unflatten(theta, q);
    model.log_likelihood = current.log_likelihood;
    model.gradient_sup_norm = current.gradient.lpNorm<Eigen::Infinity>();
    model.converged = model.gradient_sup_norm < 1e-6;
    if (!model.converged)
        log::warn(fmt::format("multinomial fit did not converge (gradient sup-norm {:.3g} after {} iterations)",
                              model.gradient_sup_norm, model.iterations));

    // Standard errors from the inverse observed information of the log-likelihood.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(current.information);
    const Eigen::VectorXd values = eig.eigenvalues();
    const double top = values.cwiseAbs().maxCoeff();
    const double tol = 1e-10 * std::max(top, 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
    Eigen::VectorXd null_weight = Eigen::VectorXd::Zero(values.size());
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values(k) > tol) {
            inv(k) = 1.0 / values(k);
        } else {
            null_weight += eig.eigenvectors().col(k).cwiseAbs2();
        }
    }
    const Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::VectorXd se(2 * q);
    for (Eigen::Index j = 0; j < 2 * q; ++j)
        se(j) = null_weight(j) > 1e-8 ? std::nan("") : std::sqrt(std::max(cov(j, j), 0.0));
    model.std_errors = unflatten(se, q);
    return model;
}

Probabilities predict_probs(const MultinomialModel& model, std::span<const double> row) {
    if (row.size() != model.width())
        throw Error("predict: row width " + std::to_string(row.size()) + " does not match model width " +
                    std::to_string(model.width()));
    std::array<double, 2> eta{};
    for (int r = 0; r < 2; ++r) {
        double e = model.params(r, 0);
        for (std::size_t j = 0; j < row.size(); ++j) e += model.params(r, static_cast<Eigen::Index>(j) + 1) * row[j];
        eta[static_cast<std::size_t>(r)] = e;
    }
    const double m = std::max({0.0, eta[0], eta[1]});
    const double w0 = std::exp(eta[0] - m), w1 = std::exp(eta[1] - m), wr = std::exp(-m);
    const double denom = w0 + w1 + wr;
    Probabilities p{};
    p[static_cast<std::size_t>(model.classes[0] - 1)] = w0 / denom;
    p[static_cast<std::size_t>(model.classes[1] - 1)] = w1 / denom;
    p[static_cast<std::size_t>(model.reference_label - 1)] = wr / denom;
    return p;
}

Probabilities predict_probs(const MultinomialModel& model, const Eigen::VectorXd& row) {
    return predict_probs(model, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
}

double expected_label(const Probabilities& p) { return 1.0 * p[0] + 2.0 * p[1] + 3.0 * p[2]; }

BaselineLabel baseline_label(const MultinomialModel& model, const Eigen::VectorXd& row, const NodeId& user,
                             const NodeId& stranger) {
    BaselineLabel b{user, stranger, 0.0, predict_probs(model, row)};
    b.value = expected_label(b.probs);
    return b;
}

std::vector<BaselineLabel> baseline_labels(const MultinomialModel& model, const Design& design) {
    check_model_columns(model, design.columns);
    std::vector<BaselineLabel> out;
    out.reserve(design.keys.size());
    for (Eigen::Index i = 0; i < design.x.rows(); ++i) {
        const auto& key = design.keys[static_cast<std::size_t>(i)];
        out.push_back(baseline_label(model, design.x.row(i).transpose(), key.first, key.second));
    }
    return out;
}

std::vector<SignificanceRow> coefficient_significance(const MultinomialModel& model) {
    if (!model.converged) throw Error("coefficient_significance: model did not converge");
    std::vector<SignificanceRow> rows;
    for (Eigen::Index j = 0; j < model.params.cols(); ++j) {
        const std::string name = j == 0 ? "(Intercept)" : model.feature_names[static_cast<std::size_t>(j - 1)];
        for (int r = 0; r < 2; ++r) {
            SignificanceRow row;
            row.parameter = name;
            row.label = model.classes[static_cast<std::size_t>(r)];
            row.estimate = model.params(r, j);
            row.std_error = model.std_errors(r, j);
            row.estimable = std::isfinite(row.std_error) && row.std_error > 0.0;
            if (row.estimable) {
                row.z = row.estimate / row.std_error;
                row.p_value = std::erfc(std::abs(row.z) / std::sqrt(2.0));
                row.significant = row.p_value < 0.05;
            } else {
                row.z = std::nan("");
                row.p_value = std::nan("");
            }
            rows.push_back(row);
        }
    }
    return rows;
}

namespace {

std::string stars(double p) {
    if (!(p == p)) return "";
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return ".";
    return "";
}

} // namespace

std::string format_significance_table(const MultinomialModel& model, const std::vector<SignificanceRow>& rows) {
    std::ostringstream os;
    os << fmt::format("{:<28}{:>20}{:>20}\n", "", "Label " + std::to_string(model.classes[0]),
                      "Label " + std::to_string(model.classes[1]));
    std::vector<std::string> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.parameter) == order.end()) order.push_back(r.parameter);
    for (const auto& name : order) {
        std::array<std::string, 2> est, se;
        for (const auto& r : rows) {
            if (r.parameter != name) continue;
            const std::size_t slot = r.label == model.classes[0] ? 0 : 1;
            est[slot] = fmt::format("{:.7f}{}", r.estimate, stars(r.p_value));
            se[slot] = r.estimable ? fmt::format("({:.4f})", r.std_error) : "(not estimable)";
        }
        os << fmt::format("{:<28}{:>20}{:>20}\n", name, est[0], est[1]);
        os << fmt::format("{:<28}{:>20}{:>20}\n", "", se[0], se[1]);
    }
    os << fmt::format("Reference category: label {}. Standard errors in parentheses. N={}\n", model.reference_label,
                      model.n_obs);
    os << "Significance codes: '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1\n";
    return os.str();
}

void write_significance_csv(const std::string& path, const std::vector<SignificanceRow>& rows) {
    std::ostringstream os;
    csv::write_row(os, {"parameter", "label", "estimate", "std_error", "z", "p_value", "estimable", "significant"});
    for (const auto& r : rows)
        csv::write_row(os, {r.parameter, std::to_string(r.label), csv::format_real(r.estimate),
                            csv::format_real(r.std_error), csv::format_real(r.z), csv::format_real(r.p_value),
                            r.estimable ? "true" : "false", r.significant ? "true" : "false"});
    io::write_text(path, os.str());
}

json model_to_json(const MultinomialModel& model) {
    json classes = json::array();
    for (int r = 0; r < 2; ++r) {
        json c;
        c["label"] = model.classes[static_cast<std::size_t>(r)];
        c["intercept"] = model.params(r, 0);
        c["intercept_std_error"] = model.std_errors(r, 0);
        std::vector<double> coef, se;
        for (Eigen::Index j = 1; j < model.params.cols(); ++j) {
            coef.push_back(model.params(r, j));
            se.push_back(model.std_errors(r, j));
        }
        c["coefficients"] = coef;
        c["std_errors"] = se;
        classes.push_back(std::move(c));
    }
    return json{{"format", "frisk.multinomial_model"},
                {"format_version", MultinomialModel::kFormatVersion},
                {"reference_label", model.reference_label},
                {"feature_names", model.feature_names},
                {"classes", std::move(classes)},
                {"ridge", model.ridge},
                {"converged", model.converged},
                {"iterations", model.iterations},
                {"log_likelihood", model.log_likelihood},
                {"gradient_sup_norm", model.gradient_sup_norm},
                {"n", model.n_obs}};
}

MultinomialModel model_from_json(const json& doc) {
    try {
        if (!doc.is_object() || doc.value("format", "") != "frisk.multinomial_model")
            throw Error("not a multinomial model document");
        const int version = doc.at("format_version").get<int>();
        if (version != MultinomialModel::kFormatVersion)
            throw Error("model format version " + std::to_string(version) + " is not supported (this tool reads " +
                        std::to_string(MultinomialModel::kFormatVersion) + ")");
        MultinomialModel m;
        m.reference_label = doc.at("reference_label").get<int>();
        m.classes = non_reference(m.reference_label);
        m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        const Eigen::Index q = static_cast<Eigen::Index>(m.feature_names.size()) + 1;
        m.params.resize(2, q);
        m.std_errors.resize(2, q);
        const auto& classes = doc.at("classes");
        if (!classes.is_array() || classes.size() != 2) throw Error("expected two non-reference classes");
        auto number = [](const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
        for (const auto& c : classes) {
            const int label = c.at("label").get<int>();
            const int r = class_row(m.classes, label);
            if (r < 0) throw Error("class label " + std::to_string(label) + " is the reference or invalid");
            const auto& coef = c.at("coefficients");
            const auto& se = c.at("std_errors");
            if (static_cast<Eigen::Index>(coef.size()) != q - 1 || static_cast<Eigen::Index>(se.size()) != q - 1)
                throw Error("coefficient count does not match feature_names");
            m.params(r, 0) = c.at("intercept").get<double>();
            m.std_errors(r, 0) = number(c.at("intercept_std_error"));
            for (Eigen::Index j = 1; j < q; ++j) {
                m.params(r, j) = coef[static_cast<std::size_t>(j - 1)].get<double>();
                m.std_errors(r, j) = number(se[static_cast<std::size_t>(j - 1)]);
            }
        }
        m.ridge = doc.at("ridge").get<double>();
        m.converged = doc.at("converged").get<bool>();
        m.iterations = doc.at("iterations").get<int>();
        m.log_likelihood = doc.at("log_likelihood").get<double>();
        m.gradient_sup_norm = doc.at("gradient_sup_norm").get<double>();
        m.n_obs = doc.at("n").get<std::size_t>();
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed model: ") + e.what());
    }
}

void save_model(const std::string& path, const MultinomialModel& model) {
    io::write_text(path, model_to_json(model).dump(2) + "\n");
}

MultinomialModel load_model(const std::string& path) {
    json doc;
    try {
        doc = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ":byte " + std::to_string(e.byte), "malformed JSON");
    }
    try {
        return model_from_json(doc);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(path, e.what());
    }
}

void check_model_columns(const MultinomialModel& model, const std::vector<std::string>& columns) {
    if (model.feature_names == columns) return;
    std::string msg = "model expects " + std::to_string(model.width()) + " columns but the design has " +
                      std::to_string(columns.size());
    for (std::size_t i = 0; i < std::min(columns.size(), model.width()); ++i)
        if (columns[i] != model.feature_names[i]) {
            msg += "; first difference at column " + std::to_string(i) + " ('" + model.feature_names[i] +
                   "' vs '" + columns[i] + "')";
            break;
        }
    throw Error("width mismatch: " + msg);
}

void write_baselines_csv(const std::string& path, const std::vector<BaselineLabel>& labels) {
    std::ostringstream os;
    csv::write_row(os, {"user_id", "stranger_id", "p1", "p2", "p3", "baseline"});
    for (const auto& b : labels)
        csv::write_row(os, {b.user, b.stranger, csv::format_real(b.probs[0]), csv::format_real(b.probs[1]),
                            csv::format_real(b.probs[2]), csv::format_real(b.value)});
    io::write_text(path, os.str());
}

std::vector<BaselineLabel> read_baselines_csv(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw ParseError(path + ":1", "missing header");
    csv::expect_header(rows.front(), {"user_id", "stranger_id", "p1", "p2", "p3", "baseline"}, path);
    std::vector<BaselineLabel> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string locus = path + ":" + std::to_string(rows[r].line);
        const auto& f = rows[r].fields;
        if (f.size() != 6) throw ParseError(locus, "expected 6 fields");
        BaselineLabel b{f[0], f[1], csv::parse_real(f[5], locus),
                        {csv::parse_real(f[2], locus), csv::parse_real(f[3], locus), csv::parse_real(f[4], locus)}};
        if (!(b.value >= 1.0 && b.value <= 3.0)) throw ParseError(locus, "baseline outside [1,3]");
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace frisk
