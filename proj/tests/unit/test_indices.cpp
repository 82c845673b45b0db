#include "copydetect/indices.hpp"
#include "copydetect/results_io.hpp"
#include "copydetect/simulate.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace copydetect;

namespace {

std::vector<Answer> letters(std::string_view s) { return decode_answers(s, 5); }

std::vector<double> uniform_probs(std::size_t items, std::size_t options) {
    return std::vector<double>(items * options, 1.0 / static_cast<double>(options));
}

} // namespace

TEST_CASE("variant names") {
    const auto all = IndexVariant::all();
    std::set<std::string> names;
    for (const auto& v : all) {
        names.insert(v.name());
        CHECK(IndexVariant::parse(v.name()) == v);
    }
    CHECK(names == std::set<std::string>{"omega1", "omega2", "omega1s", "omega2s", "gamma1", "gamma2", "gamma1s",
                                         "gamma2s"});
    CHECK_THROWS_AS(IndexVariant::parse("omega3"), std::invalid_argument);
}

TEST_CASE("count_matches") {
    const auto a = letters("ABCDEABCDE");
    CHECK(count_matches(a, a) == 10);
    CHECK(count_matches(letters("AAAA"), letters("BBBB")) == 0);
    // Position-wise comparison gives questions 1, 2, 4, 5, 10 and 11.
    CHECK(count_matches(letters("ACACDDAABAB"), letters("ACBCDADCDAB")) == 6);
    CHECK(count_matches(letters("A*C"), letters("A*C")) == 2);
    CHECK_THROWS(count_matches(letters("AB"), letters("ABC")));
}

TEST_CASE("match profiles") {
    const std::vector<Answer> c{0, 1, 2}, s{2, 1, 0};
    auto u = match_profile(Conditioning::unconditional, uniform_probs(3, 4), uniform_probs(3, 4), c, s, 4);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-15));

    std::vector<double> skewed{0.7, 0.1, 0.1, 0.1, 0.0, 0.0, 1.0, 0.0, 0.25, 0.25, 0.25, 0.25};
    auto cond = match_profile(Conditioning::conditional, uniform_probs(3, 4), skewed, c, s, 4);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(cond[i] == doctest::Approx(0.25).epsilon(1e-15));

    const std::vector<double> pc{0.8, 0.2}, ps{0.6, 0.4};
    const std::vector<Answer> one{0}, other{1};
    CHECK(std::abs(match_profile(Conditioning::unconditional, pc, ps, one, other, 2)[0] - 0.56) < 1e-15);

    const std::vector<Answer> mc{kMissing, 1, 2}, ms{2, kMissing, 0};
    CHECK(match_profile(Conditioning::conditional, uniform_probs(3, 4), uniform_probs(3, 4), mc, ms, 4).size() == 1);
    const std::vector<Answer> gone{kMissing, 1, kMissing};
    CHECK_THROWS_WITH(
        match_profile(Conditioning::conditional, uniform_probs(3, 4), uniform_probs(3, 4), gone, ms, 4),
        "no overlapping answered questions");
}

TEST_CASE("exact and standardized tails") {
    const pbd::MatchProfile half(std::vector<double>(10, 0.5));
    CHECK(exact_p(half, 0) == 1.0);
    CHECK(std::abs(exact_p(half, 10) - 9.765625e-4) < 1e-15);
    for (std::size_t m = 0; m < 10; ++m)
        CHECK(exact_p(half, m + 1) <= exact_p(half, m));

    const auto mid = standardized_p(pbd::MatchProfile(std::vector<double>(100, 0.5)), 50);
    CHECK(mid.z == 0.0);
    CHECK(mid.p == 0.5);

    const auto four = standardized_p(pbd::MatchProfile(std::vector<double>(48, 0.25)), 24);
    CHECK(four.z == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(four.p == doctest::Approx(3.167124183311992e-05).epsilon(1e-9));

    // Mean 2, variance 1 from four questions at 0.5.
    const auto one = standardized_p(pbd::MatchProfile(std::vector<double>(4, 0.5)), 3);
    CHECK(one.z == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(one.p == doctest::Approx(0.15865525393145707).epsilon(1e-12));

    const auto cc = standardized_p(pbd::MatchProfile(std::vector<double>(4, 0.5)), 3, true);
    CHECK(cc.z == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("normal approximation agrees near the centre for long profiles") {
    std::mt19937_64 rng(7);
    for (int draw = 0; draw < 50; ++draw) {
        const pbd::MatchProfile profile(oracle::random_profile(rng, 200, 0.05, 0.95));
        const double mu = profile.mean(), sd = std::sqrt(profile.variance());
        for (double k = -2.0; k <= 2.0; k += 0.5) {
            const auto m = static_cast<std::size_t>(std::lround(mu + k * sd));
            const double exact = exact_p(profile, m);
            // The inclusive exact tail pairs with a half-point shift.
            const double approx = standardized_p(profile, m, true).p;
            CHECK(std::abs(exact - approx) < 0.005);
        }
    }
}

TEST_CASE("pair direction") {
    const StudentRecord a{"a", "r", {0, 1, 2, 3}}, b{"b", "r", {0, 1, 3, 3}};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> pa(16), pb(16);
    for (std::size_t i = 0; i < 4; ++i) {
        double sa = 0, sb = 0;
        for (std::size_t v = 0; v < 4; ++v) {
            sa += pa[i * 4 + v] = u(rng);
            sb += pb[i * 4 + v] = u(rng);
        }
        for (std::size_t v = 0; v < 4; ++v) {
            pa[i * 4 + v] /= sa;
            pb[i * 4 + v] /= sb;
        }
    }
    for (const auto& v : IndexVariant::all()) {
        if (v.conditioning != Conditioning::unconditional)
            continue;
        CHECK(detect_pair(a, pa, b, pb, v, 4).p_value == detect_pair(b, pb, a, pa, v, 4).p_value);
    }

    // A near-uniform copier against a deterministic source, and the reverse.
    const std::vector<double> flat(16, 0.25);
    std::vector<double> sharp(16, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
        sharp[i * 4 + static_cast<std::size_t>(b.responses[i])] = 1.0;
    const IndexVariant omega2{Family::omega, Conditioning::conditional, Tail::exact};
    const auto forward = detect_pair(a, flat, b, sharp, omega2, 4);
    const auto reverse = detect_pair(b, sharp, a, flat, omega2, 4);
    CHECK(forward.p_value != reverse.p_value);
    CHECK(forward.matches == 3);
    CHECK(forward.n_scored == 4);

    const auto same = detect_pair(a, pa, a, pa, omega2, 4);
    double product = 1.0;
    for (std::size_t i = 0; i < 4; ++i)
        product *= pa[i * 4 + static_cast<std::size_t>(a.responses[i])];
    CHECK(same.p_value == doctest::Approx(product).epsilon(1e-12));
}

TEST_CASE("rooms") {
    Rng rng(3);
    const auto exam = sim::random_exam(12, 4, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 9, 3, rng);
    const auto table = nominal_table(exam.model, data);
    const IndexVariant v = IndexVariant::parse("omega1");
    const auto rooms = detect_all_rooms(data, table, v);
    REQUIRE(rooms.size() == 3);
    for (const auto& room : rooms) {
        CHECK(room.results.size() == 6);
        for (std::size_t k = 1; k < room.results.size(); ++k) {
            const auto& p = room.results[k - 1];
            const auto& q = room.results[k];
            CHECK(std::tie(p.copier_id, p.source_id) < std::tie(q.copier_id, q.source_id));
        }
        for (const auto& r : room.results)
            CHECK(r.room_id == room.room_id);
    }

    const auto members = data.room_members(data.room_ids()[0]);
    const std::vector<std::size_t> two(members.begin(), members.begin() + 2);
    const auto pair_room = detect_room(data, table, two, v);
    REQUIRE(pair_room.results.size() == 2);
    CHECK(pair_room.results[0].p_value == pair_room.results[1].p_value);

    const std::vector<std::size_t> lonely{members[0]};
    const auto single = detect_room(data, table, lonely, v);
    CHECK(single.skipped);
    CHECK(single.results.empty());

    CHECK_THROWS(detect_room(data, table, members, IndexVariant::parse("gamma1")));
}

TEST_CASE("pair results CSV round-trip") {
    PairResult r;
    r.copier_id = "s01";
    r.source_id = "s02";
    r.room_id = "r1";
    r.variant = IndexVariant::parse("gamma2s");
    r.matches = 17;
    r.statistic = 2.0 / 3.0;
    r.p_value = 1.2345678901234567e-7;
    std::stringstream buf;
    write_pair_results_header(buf);
    write_pair_results(buf, std::vector<PairResult>{r});
    CHECK(buf.str().starts_with("copier,source,room,variant,matches,statistic,p_value\n"));
    const auto back = read_pair_results(buf);
    REQUIRE(back.size() == 1);
    CHECK(back[0].copier_id == "s01");
    CHECK(back[0].variant == r.variant);
    CHECK(back[0].matches == 17);
    CHECK(back[0].statistic == r.statistic);
    CHECK(back[0].p_value == r.p_value);

    std::istringstream bad("copier,source,room,variant,matches,statistic,p_value\na,b,r,omega1,3,3,1.5\n");
    CHECK_THROWS_AS(read_pair_results(bad), FormatError);
}
