#include "copydetect/nominal.hpp"
#include "copydetect/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace copydetect {

namespace {

// Log-odds of a never-chosen option against the item's reference option.
constexpr double kPinnedLogit = -12.0;

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m))
        return m;
    double s = 0.0;
    for (double x : v)
        s += std::exp(x - m);
    return m + std::log(s);
}

void softmax(std::span<const double> a, std::span<const double> b, double theta, std::span<double> out) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = a[v] + b[v] * theta;
        m = std::max(m, out[v]);
    }
    double s = 0.0;
    for (double& z : out) {
        z = std::exp(z - m);
        s += z;
    }
    for (double& z : out)
        z /= s;
}

// log P(option | node) laid out [node][item][option].
std::vector<double> log_prob_table(const NominalModel& model) {
    const auto& quad = model.quadrature();
    const std::size_t items = model.num_items(), options = model.num_options();
    std::vector<double> table(quad.size() * items * options);
    std::vector<double> p(options);
    for (std::size_t q = 0; q < quad.size(); ++q) {
        for (std::size_t i = 0; i < items; ++i) {
            model.probabilities(quad.nodes[q], i, p);
            double* row = table.data() + (q * items + i) * options;
            for (std::size_t v = 0; v < options; ++v)
                row[v] = std::log(p[v]);
        }
    }
    return table;
}

// Posterior over nodes for one examinee; returns the examinee's marginal
// log-likelihood.
double examinee_posterior(const NominalModel& model, const std::vector<double>& log_table,
                          std::span<const Answer> responses, std::span<double> post) {
    const auto& quad = model.quadrature();
    const std::size_t items = model.num_items(), options = model.num_options();
    for (std::size_t q = 0; q < quad.size(); ++q) {
        double lp = std::log(quad.weights[q]);
        const double* base = log_table.data() + q * items * options;
        for (std::size_t i = 0; i < items; ++i) {
            const Answer a = responses[i];
            if (a != kMissing)
                lp += base[i * options + static_cast<std::size_t>(a)];
        }
        post[q] = lp;
    }
    const double ll = log_sum_exp(post);
    for (double& x : post)
        x = std::exp(x - ll);
    return ll;
}

EStepResult accumulate(const NominalModel& model, const ResponseMatrix& matrix, const std::vector<double>& posts,
                       const std::vector<double>& lls) {
    const std::size_t nq = model.quadrature().size();
    const std::size_t items = model.num_items(), options = model.num_options();
    EStepResult out;
    out.counts.assign(items * options * nq, 0.0);
    for (std::size_t j = 0; j < matrix.size(); ++j) {
        const auto& resp = matrix.record(j).responses;
        const double* post = posts.data() + j * nq;
        for (std::size_t i = 0; i < items; ++i) {
            if (resp[i] == kMissing)
                continue;
            double* cell = out.counts.data() + (i * options + static_cast<std::size_t>(resp[i])) * nq;
            for (std::size_t q = 0; q < nq; ++q)
                cell[q] += post[q];
        }
        out.loglik += lls[j];
    }
    return out;
}

struct ItemObjective {
    std::span<const double> counts; // [option][node]
    std::span<const double> nodes;
    std::size_t options;

    double value(std::span<const double> a, std::span<const double> b) const {
        std::vector<double> p(options);
        double total = 0.0;
        const std::size_t nq = nodes.size();
        for (std::size_t q = 0; q < nq; ++q) {
            softmax(a, b, nodes[q], p);
            for (std::size_t v = 0; v < options; ++v) {
                const double r = counts[v * nq + q];
                if (r > 0.0)
                    total += r * std::log(p[v]);
            }
        }
        return total;
    }
};

// Newton ascent on one item's expected complete-data log-likelihood, in
// reference coding (reference option fixed at 0, pinned options fixed at
// kPinnedLogit). Step halving guarantees the objective never decreases, which
// keeps EM monotone. Returns the largest change of a centered parameter.
double maximize_item(NominalModel& model, std::size_t item, std::span<const double> counts,
                     std::size_t newton_steps) {
    const std::size_t options = model.num_options();
    const auto& nodes = model.quadrature().nodes;
    const std::size_t nq = nodes.size();

    std::vector<bool> used(options, false);
    for (std::size_t v = 0; v < options; ++v) {
        double s = 0.0;
        for (std::size_t q = 0; q < nq; ++q)
            s += counts[v * nq + q];
        used[v] = s > 0.0;
    }
    const auto ref_it = std::find(used.begin(), used.end(), true);
    const std::size_t ref = static_cast<std::size_t>(ref_it - used.begin());
    std::vector<std::size_t> free;
    for (std::size_t v = 0; v < options; ++v) {
        if (used[v] && v != ref)
            free.push_back(v);
    }

    auto xi = model.intercepts(item);
    auto la = model.slopes(item);
    const std::vector<double> old_xi(xi.begin(), xi.end()), old_la(la.begin(), la.end());

    std::vector<double> a(options), b(options);
    for (std::size_t v = 0; v < options; ++v) {
        a[v] = used[v] ? xi[v] - xi[ref] : kPinnedLogit;
        b[v] = used[v] ? la[v] - la[ref] : 0.0;
    }

    const ItemObjective objective{counts, nodes, options};
    const auto dim = static_cast<Eigen::Index>(2 * free.size());
    double current = objective.value(a, b);
    std::vector<double> p(options);

    for (std::size_t step = 0; step < newton_steps && dim > 0; ++step) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
        for (std::size_t q = 0; q < nq; ++q) {
            softmax(a, b, nodes[q], p);
            double total = 0.0;
            for (std::size_t v = 0; v < options; ++v)
                total += counts[v * nq + q];
            if (total <= 0.0)
                continue;
            const double x[2] = {1.0, nodes[q]};
            for (std::size_t k = 0; k < free.size(); ++k) {
                const std::size_t u = free[k];
                const double resid = counts[u * nq + q] - total * p[u];
                for (int s = 0; s < 2; ++s)
                    grad(static_cast<Eigen::Index>(2 * k + s)) += resid * x[s];
                for (std::size_t l = 0; l < free.size(); ++l) {
                    const std::size_t w = free[l];
                    const double cov = total * ((u == w ? p[u] : 0.0) - p[u] * p[w]);
                    for (int s = 0; s < 2; ++s)
                        for (int t = 0; t < 2; ++t)
                            info(static_cast<Eigen::Index>(2 * k + s), static_cast<Eigen::Index>(2 * l + t)) +=
                                cov * x[s] * x[t];
                }
            }
        }
        info.diagonal().array() += 1e-10 * (1.0 + info.diagonal().array().abs());
        const Eigen::VectorXd delta = info.ldlt().solve(grad);
        if (!delta.allFinite())
            break;

        double t = 1.0;
        bool accepted = false;
        std::vector<double> ta(a), tb(b);
        for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
            for (std::size_t k = 0; k < free.size(); ++k) {
                ta[free[k]] = a[free[k]] + t * delta(static_cast<Eigen::Index>(2 * k));
                tb[free[k]] = b[free[k]] + t * delta(static_cast<Eigen::Index>(2 * k + 1));
            }
            const double candidate = objective.value(ta, tb);
            if (candidate >= current) {
                accepted = true;
                current = candidate;
                a = ta;
                b = tb;
                break;
            }
        }
        if (!accepted || t * delta.cwiseAbs().maxCoeff() < 1e-10)
            break;
    }

    std::copy(a.begin(), a.end(), xi.begin());
    std::copy(b.begin(), b.end(), la.begin());
    auto center_span = [](std::span<double> s) {
        double m = 0.0;
        for (double x : s)
            m += x;
        m /= static_cast<double>(s.size());
        for (double& x : s)
            x -= m;
    };
    center_span(xi);
    center_span(la);

    double change = 0.0;
    for (std::size_t v = 0; v < options; ++v) {
        change = std::max(change, std::abs(xi[v] - old_xi[v]));
        change = std::max(change, std::abs(la[v] - old_la[v]));
    }
    return change;
}

} // namespace

const char* to_string(ItemStatus status) {
    switch (status) {
    case ItemStatus::ok:
        return "ok";
    case ItemStatus::unused_option_pinned:
        return "unused_option_pinned";
    case ItemStatus::degenerate_uniform:
        return "degenerate_uniform";
    }
    return "unknown";
}

NominalModel::NominalModel(std::size_t num_items, std::size_t num_options, Quadrature quadrature)
    : items_(num_items), options_(num_options), quadrature_(std::move(quadrature)),
      intercepts_(num_items * num_options, 0.0), slopes_(num_items * num_options, 0.0),
      status_(num_items, ItemStatus::ok) {
    if (items_ == 0 || options_ < 2)
        throw std::invalid_argument("nominal model needs >= 1 item and >= 2 options");
    if (quadrature_.size() == 0 || quadrature_.nodes.size() != quadrature_.weights.size())
        throw std::invalid_argument("nominal model needs a non-empty quadrature");
}

void NominalModel::probabilities(double theta, std::size_t item, std::span<double> out) const {
    softmax(intercepts(item), slopes(item), theta, out);
}

void NominalModel::center() {
    for (std::size_t i = 0; i < items_; ++i) {
        for (auto s : {intercepts(i), slopes(i)}) {
            double m = 0.0;
            for (double x : s)
                m += x;
            m /= static_cast<double>(options_);
            for (double& x : s)
                x -= m;
        }
    }
}

double nrm_prob(const NominalModel& model, double theta, std::size_t item, std::size_t option) {
    if (item >= model.num_items() || option >= model.num_options())
        throw std::out_of_range("nrm_prob: item/option out of range");
    std::vector<double> p(model.num_options());
    model.probabilities(theta, item, p);
    return p[option];
}

EStepResult e_step(const NominalModel& model, const ResponseMatrix& matrix) {
    const auto log_table = log_prob_table(model);
    const std::size_t nq = model.quadrature().size();
    const auto n = static_cast<std::int64_t>(matrix.size());
    std::vector<double> posts(matrix.size() * nq), lls(matrix.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        lls[uj] = examinee_posterior(model, log_table, matrix.record(uj).responses,
                                     std::span<double>(posts.data() + uj * nq, nq));
    }
    return accumulate(model, matrix, posts, lls);
}

namespace serial {

EStepResult e_step(const NominalModel& model, const ResponseMatrix& matrix) {
    const auto log_table = log_prob_table(model);
    const std::size_t nq = model.quadrature().size();
    std::vector<double> posts(matrix.size() * nq), lls(matrix.size());
    for (std::size_t j = 0; j < matrix.size(); ++j)
        lls[j] = examinee_posterior(model, log_table, matrix.record(j).responses,
                                    std::span<double>(posts.data() + j * nq, nq));
    return accumulate(model, matrix, posts, lls);
}

} // namespace serial

double marginal_loglik(const NominalModel& model, const ResponseMatrix& matrix) {
    return e_step(model, matrix).loglik;
}

NominalFit fit_nominal_mml(const ResponseMatrix& matrix, const NominalFitConfig& config) {
    if (matrix.size() < config.min_examinees)
        throw std::invalid_argument("insufficient examinees: " + std::to_string(matrix.size()) + " < " +
                                    std::to_string(config.min_examinees));
    const auto& design = matrix.design();
    const std::size_t items = design.num_questions(), options = design.num_options();

    NominalFit fit{NominalModel(items, options, gauss_hermite_normal(config.quadrature_nodes)), false, 0, {}};
    auto& model = fit.model;

    // Observed option counts decide item status and the starting values.
    std::vector<double> observed(items * options, 0.0);
    for (const auto& rec : matrix.records()) {
        for (std::size_t i = 0; i < items; ++i) {
            if (rec.responses[i] != kMissing)
                observed[i * options + static_cast<std::size_t>(rec.responses[i])] += 1.0;
        }
    }
    for (std::size_t i = 0; i < items; ++i) {
        const double* row = observed.data() + i * options;
        const auto used = static_cast<std::size_t>(std::count_if(row, row + options, [](double c) { return c > 0.0; }));
        double total = 0.0;
        for (std::size_t v = 0; v < options; ++v)
            total += row[v];
        if (used <= 1) {
            model.set_status(i, ItemStatus::degenerate_uniform);
            continue;
        }
        model.set_status(i, used < options ? ItemStatus::unused_option_pinned : ItemStatus::ok);
        const std::size_t ref = static_cast<std::size_t>(std::find_if(row, row + options, [](double c) { return c > 0.0; }) - row);
        auto xi = model.intercepts(i);
        auto la = model.slopes(i);
        const double ref_logit = std::log(row[ref] / total);
        for (std::size_t v = 0; v < options; ++v) {
            xi[v] = row[v] > 0.0 ? std::log(row[v] / total) - ref_logit : kPinnedLogit;
            la[v] = static_cast<std::size_t>(design.key(i)) == v ? 1.0 : 0.0;
        }
        if (row[design.key(i)] <= 0.0)
            la[design.key(i)] = 0.0;
        // Pinned options share the reference option's slope, as in maximize_item.
        for (std::size_t v = 0; v < options; ++v) {
            if (row[v] <= 0.0)
                la[v] = la[ref];
        }
    }
    model.center();

    const std::size_t nq = model.quadrature().size();
    for (std::size_t cycle = 0; cycle < config.max_cycles; ++cycle) {
        const auto estep = e_step(model, matrix);
        fit.loglik_trace.push_back(estep.loglik);

        double change = 0.0;
        std::vector<double> item_change(items, 0.0);
        parallel_for(items, [&](std::size_t i) {
            if (model.status(i) == ItemStatus::degenerate_uniform)
                return;
            const std::span<const double> counts(estep.counts.data() + i * options * nq, options * nq);
            item_change[i] = maximize_item(model, i, counts, config.newton_steps);
        });
        for (double c : item_change)
            change = std::max(change, c);
        fit.cycles = cycle + 1;
        if (change < config.tolerance) {
            fit.converged = true;
            break;
        }
    }
    fit.loglik_trace.push_back(marginal_loglik(model, matrix));
    return fit;
}

AbilityEstimate eap_ability(const NominalModel& model, std::span<const Answer> responses) {
    if (responses.size() != model.num_items())
        throw std::invalid_argument("eap_ability: response length does not match the model");
    const auto& quad = model.quadrature();
    AbilityEstimate est;
    if (std::all_of(responses.begin(), responses.end(), [](Answer a) { return a == kMissing; })) {
        est.no_answers = true;
        double m2 = 0.0;
        for (std::size_t q = 0; q < quad.size(); ++q)
            m2 += quad.weights[q] * quad.nodes[q] * quad.nodes[q];
        est.theta = 0.0;
        est.posterior_sd = std::sqrt(m2);
        return est;
    }
    std::vector<double> logpost(quad.size());
    std::vector<double> p(model.num_options());
    for (std::size_t q = 0; q < quad.size(); ++q) {
        double lp = std::log(quad.weights[q]);
        for (std::size_t i = 0; i < model.num_items(); ++i) {
            if (responses[i] == kMissing)
                continue;
            model.probabilities(quad.nodes[q], i, p);
            lp += std::log(p[static_cast<std::size_t>(responses[i])]);
        }
        logpost[q] = lp;
    }
    const double norm = log_sum_exp(logpost);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const double w = std::exp(logpost[q] - norm);
        mean += w * quad.nodes[q];
        m2 += w * quad.nodes[q] * quad.nodes[q];
    }
    est.theta = mean;
    est.posterior_sd = std::sqrt(std::max(0.0, m2 - mean * mean));
    return est;
}

} // namespace copydetect
