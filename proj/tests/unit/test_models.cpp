#include "copydetect/nominal.hpp"
#include "copydetect/simulate.hpp"
#include "copydetect/wesolowsky.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace copydetect;

namespace {

NominalModel two_option_model() {
    NominalModel m(1, 2, gauss_hermite_normal(21));
    m.slopes(0)[1] = 1.0;
    return m;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("quadrature integrates normal moments") {
    const auto q = gauss_hermite_normal(21);
    double m0 = 0, m2 = 0, m4 = 0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        m0 += q.weights[k];
        m2 += q.weights[k] * q.nodes[k] * q.nodes[k];
        m4 += q.weights[k] * std::pow(q.nodes[k], 4);
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("nrm_prob examples") {
    NominalModel flat(1, 4, gauss_hermite_normal(5));
    for (std::size_t v = 0; v < 4; ++v)
        CHECK(nrm_prob(flat, 0.7, 0, v) == doctest::Approx(0.25).epsilon(1e-15));

    const auto m = two_option_model();
    CHECK(nrm_prob(m, 0.0, 0, 0) == doctest::Approx(0.5));
    CHECK(std::abs(nrm_prob(m, std::log(3.0), 0, 0) - 0.25) < 1e-15);
    CHECK(std::abs(nrm_prob(m, std::log(3.0), 0, 1) - 0.75) < 1e-15);

    // Extreme abilities must not overflow.
    CHECK(std::isfinite(nrm_prob(m, 1e4, 0, 1)));
    CHECK_THROWS_AS(nrm_prob(m, 0.0, 0, 2), std::out_of_range);
}

TEST_CASE("nominal probabilities sum to one and survive centering shifts") {
    Rng rng(4);
    auto exam = sim::random_exam(10, 5, rng);
    std::vector<double> p(5), shifted(5);
    for (double theta : {-4.0, -1.0, 0.0, 0.3, 2.5}) {
        for (std::size_t i = 0; i < 10; ++i) {
            exam.model.probabilities(theta, i, p);
            CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
        }
    }
    auto moved = exam.model;
    for (auto& x : moved.intercepts(3))
        x += 2.0;
    for (auto& x : moved.slopes(3))
        x -= 0.7;
    moved.center();
    for (std::size_t v = 0; v < 5; ++v) {
        CHECK(std::abs(nrm_prob(moved, 0.8, 3, v) - nrm_prob(exam.model, 0.8, 3, v)) < 1e-14);
        CHECK(std::abs(moved.intercept(3, v) - exam.model.intercept(3, v)) < 1e-12);
    }
}

TEST_CASE("EAP behaviour") {
    Rng rng(12);
    const auto exam = sim::random_exam(30, 4, rng);
    const std::vector<Answer> none(30, kMissing);
    const auto prior = eap_ability(exam.model, none);
    CHECK(prior.no_answers);
    CHECK(prior.theta == 0.0);
    CHECK(prior.posterior_sd == doctest::Approx(1.0).epsilon(1e-10));

    std::vector<Answer> right(exam.design.key().begin(), exam.design.key().end());
    std::vector<Answer> wrong(30);
    for (std::size_t i = 0; i < 30; ++i)
        wrong[i] = static_cast<Answer>((right[i] + 1) % 4);
    const auto hi = eap_ability(exam.model, right);
    const auto lo = eap_ability(exam.model, wrong);
    CHECK(hi.theta > lo.theta);
    CHECK(std::abs(hi.theta) <= exam.model.quadrature().nodes.back());
    CHECK(hi.posterior_sd >= 0.0);
}

TEST_CASE("EAP is close to a true ability of one on average") {
    Rng rng(2024);
    const auto exam = sim::random_exam(30, 4, rng);
    std::vector<double> p(4);
    double total = 0.0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        std::vector<Answer> resp(30);
        for (std::size_t i = 0; i < 30; ++i) {
            exam.model.probabilities(1.0, i, p);
            resp[i] = static_cast<Answer>(std::discrete_distribution<int>(p.begin(), p.end())(rng));
        }
        total += eap_ability(exam.model, resp).theta;
    }
    CHECK(std::abs(total / reps - 1.0) < 0.15);
}

TEST_CASE("MML fit recovers parameters and climbs the likelihood") {
    Rng rng(77);
    const auto exam = sim::random_exam(30, 4, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 1000, 10, rng);
    const auto fit = fit_nominal_mml(data);
    CHECK(fit.converged);
    for (std::size_t c = 1; c < fit.loglik_trace.size(); ++c)
        CHECK(fit.loglik_trace[c] >= fit.loglik_trace[c - 1] - 1e-8);

    const std::vector<double> true_la(exam.model.all_slopes().begin(), exam.model.all_slopes().end());
    const std::vector<double> est_la(fit.model.all_slopes().begin(), fit.model.all_slopes().end());
    const std::vector<double> true_xi(exam.model.all_intercepts().begin(), exam.model.all_intercepts().end());
    const std::vector<double> est_xi(fit.model.all_intercepts().begin(), fit.model.all_intercepts().end());
    CHECK(correlation(true_la, est_la) > 0.9);
    CHECK(correlation(true_xi, est_xi) > 0.85);

    for (std::size_t i = 0; i < 30; ++i) {
        double sx = 0, sl = 0;
        for (std::size_t v = 0; v < 4; ++v) {
            sx += fit.model.intercept(i, v);
            sl += fit.model.slope(i, v);
        }
        CHECK(std::abs(sx) < 1e-8);
        CHECK(std::abs(sl) < 1e-8);
    }

    const auto again = fit_nominal_mml(data);
    CHECK(again.model == fit.model);
    CHECK(again.cycles == fit.cycles);
}

TEST_CASE("MML fit flags unused options and degenerate items") {
    Rng rng(9);
    auto exam = sim::random_exam(6, 4, rng);
    auto data = sim::generate_synthetic(exam.model, exam.design, 300, 3, rng);
    std::vector<StudentRecord> recs(data.records().begin(), data.records().end());
    for (auto& r : recs) {
        if (r.responses[0] == 3)
            r.responses[0] = 2;
        r.responses[1] = 1;
    }
    const ResponseMatrix edited(data.design(), recs);
    const auto fit = fit_nominal_mml(edited);
    CHECK(fit.model.status(0) == ItemStatus::unused_option_pinned);
    CHECK(fit.model.status(1) == ItemStatus::degenerate_uniform);
    CHECK(nrm_prob(fit.model, 0.5, 1, 2) == doctest::Approx(0.25));
    CHECK(nrm_prob(fit.model, 0.5, 0, 3) < 1e-4);
    for (std::size_t c = 1; c < fit.loglik_trace.size(); ++c)
        CHECK(fit.loglik_trace[c] >= fit.loglik_trace[c - 1] - 1e-8);
}

TEST_CASE("MML fit refuses small samples") {
    Rng rng(1);
    const auto exam = sim::random_exam(5, 3, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 50, 2, rng);
    CHECK_THROWS_WITH_AS(fit_nominal_mml(data), doctest::Contains("insufficient examinees"), std::invalid_argument);
}

TEST_CASE("Wesolowsky probabilities") {
    const ExamDesign d(4, {0});
    const WesolowskyModel m(d, {0.6}, {0.0, 0.5, 0.3, 0.2});
    std::vector<double> p(4);
    m.probabilities(1.0, 0, p);
    CHECK(std::abs(p[0] - 0.6) < 1e-15);
    CHECK(std::abs(p[1] - 0.2) < 1e-15);
    CHECK(std::abs(p[2] - 0.12) < 1e-15);
    CHECK(std::abs(p[3] - 0.08) < 1e-15);

    const ExamDesign d2(2, {1, 0});
    const WesolowskyModel two(d2, {0.3, 0.8}, {1.0, 0.0, 0.0, 1.0});
    std::vector<double> q(2);
    two.probabilities(2.5, 0, q);
    CHECK(q[0] == 1.0 - q[1]);

    // a = 1 is the identity, and r near one stays near one.
    const ExamDesign d3(3, std::vector<Answer>(5, 0));
    const WesolowskyModel w(d3, {1e-6, 0.2, 0.5, 0.9, 1.0 - 1e-6}, std::vector<double>(15, 0.5));
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(w.correct_prob(1.0, i) - w.proportion_correct(i)) < 1e-14);
    for (double a : {1.0, 5.0, 1e3})
        CHECK(w.correct_prob(a, 4) >= 1.0 - 1e-6 - 1e-12);
}

TEST_CASE("Wesolowsky root function increases in a") {
    Rng rng(31);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const ExamDesign d(4, std::vector<Answer>(20, 0));
    std::vector<double> r(20);
    for (auto& x : r)
        x = u(rng);
    const WesolowskyModel m(d, r, std::vector<double>(80, 1.0 / 3.0));
    const std::vector<Answer> all(20, 0);
    double prev = -1.0;
    for (double la = std::log(1e-3); la <= std::log(1e3); la += 0.05) {
        const double s = m.expected_score(std::exp(la), all);
        // Near both ends of the bracket the score underflows to 0 or rounds to 1.
        if (prev > 0.0 && prev < 1.0 - 1e-12)
            CHECK(s > prev);
        else
            CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("Wesolowsky fit: fixed point, residuals and flags") {
    const ExamDesign d(4, std::vector<Answer>(10, 0));
    const std::vector<double> r{0.3, 0.4, 0.6, 0.8, 0.5, 0.7, 0.9, 0.3, 0.6, 0.9};
    const WesolowskyModel m(d, r, std::vector<double>(40, 1.0 / 3.0));
    std::vector<Answer> six_right(10, 1);
    for (std::size_t i = 0; i < 6; ++i)
        six_right[i] = 0;
    const auto st = m.solve_student(six_right);
    CHECK(st.status == AbilityStatus::ok);
    CHECK(std::abs(st.a - 1.0) < 1e-6);

    CHECK(m.solve_student(std::vector<Answer>(10, kMissing)).status == AbilityStatus::no_answers);
    const auto perfect = m.solve_student(std::vector<Answer>(10, 0));
    const auto hopeless = m.solve_student(std::vector<Answer>(10, 2));
    CHECK(perfect.a > 10.0);
    CHECK(hopeless.a < 0.5);
    CHECK(perfect.c == 1.0 - WesolowskyModel::kEpsilon);
    CHECK(hopeless.c == WesolowskyModel::kEpsilon);

    Rng rng(5);
    const auto exam = sim::random_exam(25, 4, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 400, 4, rng);
    const auto fit = fit_wesolowsky(data);
    std::vector<double> p(4);
    for (std::size_t j = 0; j < fit.students.size(); ++j) {
        const auto& s = fit.students[j];
        if (s.status == AbilityStatus::ok)
            CHECK(std::abs(s.residual) <= 1e-8);
        for (std::size_t i = 0; i < 25; ++i) {
            fit.probabilities(s.a, i, p);
            CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
        }
    }
    for (std::size_t i = 0; i < 25; ++i) {
        double total = 0;
        for (std::size_t v = 0; v < 4; ++v)
            total += fit.wrong_share(i, v);
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK_THROWS(fit_wesolowsky(ResponseMatrix(exam.design, {data.record(0)})));
}
