#include "copydetect/wesolowsky.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace copydetect {

const char* to_string(AbilityStatus status) {
    switch (status) {
    case AbilityStatus::ok:
        return "ok";
    case AbilityStatus::clamped_low:
        return "clamped_low";
    case AbilityStatus::clamped_high:
        return "clamped_high";
    case AbilityStatus::no_answers:
        return "no_answers";
    }
    return "unknown";
}

WesolowskyModel::WesolowskyModel(ExamDesign design, std::vector<double> proportion_correct,
                                 std::vector<double> wrong_shares)
    : design_(std::move(design)), r_(std::move(proportion_correct)), q_(std::move(wrong_shares)) {
    if (r_.size() != num_items() || q_.size() != num_items() * num_options())
        throw std::invalid_argument("Wesolowsky model: parameter sizes do not match the design");
    for (double r : r_) {
        if (!(r >= kEpsilon && r <= 1.0 - kEpsilon))
            throw std::invalid_argument("Wesolowsky model: proportion correct outside [eps, 1-eps]");
    }
}

double WesolowskyModel::correct_prob(double a, std::size_t item) const {
    const double r = r_[item];
    // 1 - (1-r)^a = -expm1(a log1p(-r))
    const double inner = -std::expm1(a * std::log1p(-r));
    return std::exp(std::log(inner) / a);
}

double WesolowskyModel::expected_score(double a, std::span<const Answer> responses) const {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (responses[i] == kMissing)
            continue;
        s += correct_prob(a, i);
        ++n;
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

void WesolowskyModel::probabilities(double a, std::size_t item, std::span<double> out) const {
    const double p = correct_prob(a, item);
    const auto key = static_cast<std::size_t>(design_.key(item));
    for (std::size_t v = 0; v < out.size(); ++v)
        out[v] = v == key ? p : (1.0 - p) * wrong_share(item, v);
}

WesolowskyStudent WesolowskyModel::solve_student(std::span<const Answer> responses) const {
    if (responses.size() != num_items())
        throw std::invalid_argument("Wesolowsky: response length does not match the design");
    WesolowskyStudent st;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (responses[i] == kMissing)
            continue;
        ++st.answered;
        if (responses[i] == design_.key(i))
            ++correct;
    }
    if (st.answered == 0) {
        st.status = AbilityStatus::no_answers;
        st.a = std::nan("");
        return st;
    }
    st.c = std::clamp(static_cast<double>(correct) / static_cast<double>(st.answered), kEpsilon, 1.0 - kEpsilon);

    auto residual = [&](double log_a) { return expected_score(std::exp(log_a), responses) - st.c; };
    const double lo = std::log(kMinA), hi = std::log(kMaxA);
    const double f_lo = residual(lo), f_hi = residual(hi);
    if (f_lo >= 0.0) {
        st.a = kMinA;
        st.residual = f_lo;
        st.status = f_lo == 0.0 ? AbilityStatus::ok : AbilityStatus::clamped_low;
        return st;
    }
    if (f_hi <= 0.0) {
        st.a = kMaxA;
        st.residual = f_hi;
        st.status = f_hi == 0.0 ? AbilityStatus::ok : AbilityStatus::clamped_high;
        return st;
    }
    std::uintmax_t max_iter = 200;
    const auto bracket = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi,
                                                           boost::math::tools::eps_tolerance<double>(52), max_iter);
    double log_a = 0.5 * (bracket.first + bracket.second);
    double best = residual(log_a);
    for (double cand : {bracket.first, bracket.second}) {
        const double r = residual(cand);
        if (std::abs(r) < std::abs(best)) {
            best = r;
            log_a = cand;
        }
    }
    st.a = std::exp(log_a);
    st.residual = best;
    return st;
}

const WesolowskyStudent* WesolowskyModel::find_student(std::string_view id) const {
    for (std::size_t j = 0; j < student_ids.size(); ++j) {
        if (student_ids[j] == id)
            return &students[j];
    }
    return nullptr;
}

WesolowskyModel fit_wesolowsky(const ResponseMatrix& matrix) {
    if (matrix.size() < 2)
        throw std::invalid_argument("Wesolowsky fit needs at least 2 records");
    const auto& design = matrix.design();
    const std::size_t items = design.num_questions(), options = design.num_options();

    std::vector<double> r(items), q(items * options, 0.0);
    for (std::size_t i = 0; i < items; ++i) {
        const auto key = static_cast<std::size_t>(design.key(i));
        std::vector<double> counts(options, 0.0);
        double answered = 0.0;
        for (const auto& rec : matrix.records()) {
            const Answer a = rec.responses[i];
            if (a == kMissing)
                continue;
            counts[static_cast<std::size_t>(a)] += 1.0;
            answered += 1.0;
        }
        const double raw = answered > 0.0 ? counts[key] / answered : 0.5;
        r[i] = std::clamp(raw, WesolowskyModel::kEpsilon, 1.0 - WesolowskyModel::kEpsilon);

        const double wrong = answered - counts[key];
        for (std::size_t v = 0; v < options; ++v) {
            if (v == key)
                continue;
            q[i * options + v] = wrong > 0.0 ? counts[v] / wrong : 1.0 / static_cast<double>(options - 1);
        }
    }

    WesolowskyModel model(design, std::move(r), std::move(q));
    model.student_ids.reserve(matrix.size());
    model.students.reserve(matrix.size());
    for (const auto& rec : matrix.records()) {
        model.student_ids.push_back(rec.student_id);
        model.students.push_back(model.solve_student(rec.responses));
    }
    return model;
}

double wes_prob(const WesolowskyModel& model, std::size_t student, std::size_t item, std::size_t option) {
    if (student >= model.students.size() || item >= model.num_items() || option >= model.num_options())
        throw std::out_of_range("wes_prob: student/item/option out of range");
    const auto& st = model.students[student];
    if (!st.usable())
        throw std::domain_error("wes_prob: student " + model.student_ids[student] + " has no ability estimate");
    std::vector<double> p(model.num_options());
    model.probabilities(st.a, item, p);
    return p[option];
}

} // namespace copydetect
