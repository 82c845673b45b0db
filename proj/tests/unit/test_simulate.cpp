#include "copydetect/results_io.hpp"
#include "copydetect/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace copydetect;

namespace {

ResponseMatrix tiny_rooms() {
    ExamDesign d(2, {0, 1});
    return ResponseMatrix(d, {{"a", "r1", {0, 1}}, {"b", "r2", {1, 1}}});
}

struct Fixture {
    sim::SyntheticExam exam;
    ResponseMatrix data;
    ProbabilityTable omega;
    WesolowskyModel wes;
    ProbabilityTable gamma;

    explicit Fixture(std::uint64_t seed, std::size_t students = 300)
        : exam(make_exam(seed)), data(make_data(exam, seed, students)), omega(nominal_table(exam.model, data)),
          wes(fit_wesolowsky(data)), gamma(wesolowsky_table(wes, data)) {}

    static sim::SyntheticExam make_exam(std::uint64_t seed) {
        Rng rng(seed);
        return sim::random_exam(20, 4, rng);
    }
    static ResponseMatrix make_data(const sim::SyntheticExam& e, std::uint64_t seed, std::size_t students) {
        Rng rng(seed + 1);
        return sim::generate_synthetic(e.model, e.design, students, 6, rng);
    }
    sim::ModelTables tables() const { return {&omega, &gamma}; }
};

} // namespace

TEST_CASE("default copy levels") {
    CHECK(sim::default_copy_levels(48) == std::vector<std::size_t>{1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 48});
    CHECK(sim::default_copy_levels(10) == std::vector<std::size_t>{1, 5, 10});
    CHECK(sim::default_copy_levels(3) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("cross-room sampling") {
    Rng rng(1);
    ExamDesign d(2, {0});
    const ResponseMatrix one_room(d, {{"a", "r", {0}}, {"b", "r", {1}}});
    CHECK_THROWS_WITH(sim::sample_cross_room_pairs(one_room, 1, rng), "cross-room pairs need at least 2 rooms");

    auto both = sim::sample_cross_room_pairs(tiny_rooms(), 2, rng);
    std::set<std::pair<std::size_t, std::size_t>> got;
    for (auto p : both)
        got.insert({p.copier, p.source});
    CHECK(got == std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
    CHECK_THROWS_WITH(sim::sample_cross_room_pairs(tiny_rooms(), 3, rng),
                      "requested 3 cross-room pairs but at most 2 exist");

    const Fixture f(2);
    Rng r1(55), r2(55);
    const auto s1 = sim::sample_cross_room_pairs(f.data, 500, r1);
    const auto s2 = sim::sample_cross_room_pairs(f.data, 500, r2);
    CHECK(s1 == s2);
    std::set<std::pair<std::size_t, std::size_t>> distinct;
    for (auto p : s1) {
        CHECK(f.data.record(p.copier).room_id != f.data.record(p.source).room_id);
        distinct.insert({p.copier, p.source});
    }
    CHECK(distinct.size() == 500);
}

TEST_CASE("copy injection") {
    const auto s = decode_answers("ACBCDADCDAB", 5);
    const auto c = decode_answers("DCABCDAABCB", 5);
    const std::vector<std::size_t> positions{0, 3, 4, 9, 10};
    CHECK(encode_answers(sim::inject_copy_at(c, s, positions)) == "ACACDDAABAB");

    Rng rng(3);
    CHECK(sim::inject_copy(c, s, 0, rng) == c);
    CHECK(sim::inject_copy(c, s, 11, rng) == s);
    CHECK_THROWS_AS(sim::inject_copy(c, s, 12, rng), std::out_of_range);

    const auto with_gap = decode_answers("A*B", 3);
    const std::vector<std::size_t> middle{1};
    CHECK(sim::inject_copy_at(decode_answers("CCC", 3), with_gap, middle)[1] == kMissing);

    Rng a(8), b(8);
    const auto five = sim::inject_copy(c, s, 5, a);
    const auto nine = sim::inject_copy(c, s, 9, b);
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (five[i] != c[i])
            CHECK(nine[i] == s[i]);
    }
}

TEST_CASE("rate estimates") {
    const auto r = sim::RateEstimate::from_counts(25, 10000);
    CHECK(r.rate == 0.0025);
    CHECK(r.se == doctest::Approx(std::sqrt(0.0025 * 0.9975 / 10000)));
    CHECK(r.per_thousand() == doctest::Approx(2.5));
}

TEST_CASE("protocol edge cases") {
    const Fixture f(4);
    sim::SimulationConfig cfg;
    cfg.num_pairs = 400;
    cfg.copy_levels = {0, 5, 20};
    cfg.seed = 9;

    const auto res = sim::run_protocol(f.data, f.tables(), cfg);
    REQUIRE(res.variants.size() == 8);
    for (std::size_t v = 0; v < 8; ++v) {
        CHECK(res.curves[v].power[0].rejections == res.type1[v].rejections);
        CHECK(res.curves[v].power[2].rate >= 0.99);
        CHECK(res.type1[v].trials == 400);
    }

    cfg.alpha = 1.0;
    const auto always = sim::run_protocol(f.data, f.tables(), cfg);
    for (const auto& t : always.type1)
        CHECK(t.rate == 1.0);

    cfg.alpha = 1e-300;
    cfg.variants = {IndexVariant::parse("omega2"), IndexVariant::parse("gamma1")};
    const auto never = sim::run_protocol(f.data, f.tables(), cfg);
    for (const auto& t : never.type1)
        CHECK(t.rate == 0.0);

    cfg.alpha = 0.0;
    CHECK_THROWS(sim::run_protocol(f.data, f.tables(), cfg));
    cfg.alpha = 0.01;
    cfg.copy_levels = {21};
    CHECK_THROWS(sim::run_protocol(f.data, f.tables(), cfg));
    cfg.copy_levels = {1};
    CHECK_THROWS(sim::run_protocol(f.data, sim::ModelTables{&f.omega, nullptr}, cfg));

    const auto single = sim::type1_rate(f.data, IndexVariant::parse("omega2"), f.omega, cfg);
    CHECK(single.trials == 400);
}

TEST_CASE("protocol is deterministic and matches the serial reference") {
    const Fixture f(6);
    sim::SimulationConfig cfg;
    cfg.num_pairs = 300;
    cfg.copy_levels = {1, 5, 10};
    cfg.seed = 21;
    const auto a = sim::run_protocol(f.data, f.tables(), cfg);
    const auto b = sim::serial::run_protocol(f.data, f.tables(), cfg);
    std::ostringstream ta, tb, pa, pb;
    write_type1_csv(ta, a);
    write_type1_csv(tb, b);
    write_power_csv(pa, a);
    write_power_csv(pb, b);
    CHECK(ta.str() == tb.str());
    CHECK(pa.str() == pb.str());
    CHECK(ta.str().starts_with("variant,type1_rate,se\n"));
    CHECK(pa.str().starts_with("variant,k,power,se\n"));
}

TEST_CASE("synthetic data follows the model") {
    Rng rng(40);
    auto exam = sim::random_exam(3, 4, rng);
    Rng r1(41), r2(41);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 100000, 5, r1);
    CHECK(sim::generate_synthetic(exam.model, exam.design, 100000, 5, r2) == data);
    CHECK(data.room_ids().size() == 5);

    // Marginal option frequencies integrated over a fine normal rule.
    const auto fine = gauss_hermite_normal(80);
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> counts(4, 0.0);
        for (const auto& r : data.records())
            counts[static_cast<std::size_t>(r.responses[i])] += 1.0;
        for (std::size_t v = 0; v < 4; ++v) {
            double expected = 0.0;
            for (std::size_t k = 0; k < fine.size(); ++k)
                expected += fine.weights[k] * nrm_prob(exam.model, fine.nodes[k], i, v);
            const double se = std::sqrt(expected * (1 - expected) / 100000.0);
            CHECK(std::abs(counts[v] / 100000.0 - expected) <= 3 * se);
        }
    }

    NominalModel coin(1, 2, gauss_hermite_normal(5));
    const auto flips = sim::generate_synthetic(coin, ExamDesign(2, {0}), 20000, 2, r1);
    double heads = 0;
    for (const auto& r : flips.records())
        heads += r.responses[0] == 0;
    CHECK(std::abs(heads / 20000.0 - 0.5) < 3 * std::sqrt(0.25 / 20000.0));
}
