#include "copydetect/dataio.hpp"
#include "copydetect/model_io.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace copydetect;

namespace {

ExamDesign design4() {
    std::istringstream in("ACBD\n");
    return read_key(in, 4);
}

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("key parsing") {
    const auto d = design4();
    CHECK(d.num_questions() == 4);
    CHECK(d.key(0) == 0);
    CHECK(d.key(1) == 2);
    CHECK(d.key(2) == 1);
    CHECK(d.key(3) == 3);

    CHECK(error_of([] {
              std::istringstream in("ACBE\n");
              read_key(in, 4);
          }) == "key: option E out of range");
    CHECK(error_of([] {
              std::istringstream in("");
              read_key(in, 4);
          }) == "empty key");
    CHECK_THROWS_AS(parse_key("/nonexistent/key.txt", 4), FormatError);
}

TEST_CASE("response parsing") {
    const auto d = design4();
    std::istringstream in("student_id,room_id,answers\ns1,r1,ACBD\ns2,r1,A*BD\n");
    const auto m = read_responses(in, d);
    REQUIRE(m.size() == 2);
    CHECK(m.record(0).responses == std::vector<Answer>{0, 2, 1, 3});
    CHECK(m.record(1).responses == std::vector<Answer>{0, kMissing, 1, 3});
    CHECK(m.record(1).num_answered() == 3);

    CHECK(error_of([&] {
              std::istringstream bad("s1,r1,ACBD\ns2,r1,A*BD\ns3,r1,ACB\n");
              read_responses(bad, d);
          }) == "row 3: expected 4 answers");
    CHECK(error_of([&] {
              std::istringstream bad("s1,r1,ACBD\ns1,r2,ACBD\n");
              read_responses(bad, d);
          }) == "row 2: duplicate student_id s1");
    CHECK(error_of([&] {
              std::istringstream bad("s1,r1,ACBF\n");
              read_responses(bad, d);
          }) == "row 1: option F out of range");
    CHECK(error_of([&] {
              std::istringstream bad("s1,ACBD\n");
              read_responses(bad, d);
          }).starts_with("row 1:"));
}

TEST_CASE("rooms and lookups") {
    const auto d = design4();
    std::istringstream in("a,r2,AAAA\nb,r1,BBBB\nc,r2,CCCC\n");
    const auto m = read_responses(in, d);
    CHECK(m.room_ids() == std::vector<std::string>{"r2", "r1"});
    CHECK(m.room_members("r2") == std::vector<std::size_t>{0, 2});
    CHECK(m.find("c") == 2);
    CHECK_FALSE(m.find("z").has_value());
}

TEST_CASE("serialize then parse is the identity") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        const std::size_t items = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        std::uniform_int_distribution<int> opt(-1, static_cast<int>(n) - 1);
        std::vector<Answer> key(items);
        for (auto& k : key)
            k = static_cast<Answer>(std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng));
        ExamDesign design(n, key);
        std::vector<StudentRecord> recs;
        for (int j = 0; j < 15; ++j) {
            StudentRecord r{"id" + std::to_string(j), "room" + std::to_string(j % 3), {}};
            for (std::size_t i = 0; i < items; ++i)
                r.responses.push_back(static_cast<Answer>(opt(rng)));
            recs.push_back(r);
        }
        const ResponseMatrix m(design, recs);
        std::stringstream buf;
        write_responses(buf, m);
        CHECK(read_responses(buf, design) == m);

        std::stringstream kbuf;
        write_key(kbuf, design);
        CHECK(read_key(kbuf, n) == design);
    }
}

TEST_CASE("fingerprint separates exams") {
    const auto d = design4();
    CHECK(d.fingerprint() == design4().fingerprint());
    CHECK(d.fingerprint() != ExamDesign(4, {0, 2, 1, 2}).fingerprint());
    CHECK(d.fingerprint() != ExamDesign(5, {0, 2, 1, 3}).fingerprint());
    CHECK(d.fingerprint_hex().size() == 16);
}

TEST_CASE("model files round-trip bit-exactly") {
    const auto d = design4();
    NominalModel m(4, 4, gauss_hermite_normal(7));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t v = 0; v < 4; ++v) {
            m.intercepts(i)[v] = g(rng);
            m.slopes(i)[v] = g(rng) * 1e-7 + 1.0 / 3.0;
        }
    m.set_status(2, ItemStatus::unused_option_pinned);

    std::stringstream buf;
    write_model(buf, d, m, NominalFitSummary{true, 17, -1234.5678901234567});
    const auto loaded = read_model(buf);
    REQUIRE(loaded.is_nominal());
    CHECK(loaded.nominal() == m);
    CHECK(loaded.design == d);
    REQUIRE(loaded.fit.has_value());
    CHECK(loaded.fit->final_loglik == -1234.5678901234567);

    WesolowskyModel w(d, {0.5, 0.25, 0.125, 1.0 / 3.0}, std::vector<double>(16, 0.0));
    w.student_ids = {"x", "y"};
    w.students = {WesolowskyStudent{0.7, 0.5, 1e-12, 4, AbilityStatus::ok},
                  WesolowskyStudent{1e-3, 1e-6, 0.01, 4, AbilityStatus::clamped_low}};
    std::stringstream wbuf;
    write_model(wbuf, w);
    const auto wl = read_model(wbuf);
    REQUIRE_FALSE(wl.is_nominal());
    CHECK(wl.wesolowsky() == w);
}

TEST_CASE("model loading rejects bad containers") {
    const auto d = design4();
    NominalModel m(4, 4, gauss_hermite_normal(5));
    std::stringstream buf;
    write_model(buf, d, m);
    const std::string text = buf.str();

    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(read_model(truncated), FormatError);

    std::string wrong_magic = text;
    wrong_magic.replace(wrong_magic.find("copydetect-model"), 16, "something-else!!");
    std::istringstream wm(wrong_magic);
    CHECK_THROWS_AS(read_model(wm), FormatError);

    std::string wrong_version = text;
    const auto pos = wrong_version.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    wrong_version.replace(pos, 12, "\"version\": 7");
    std::istringstream wv(wrong_version);
    CHECK(error_of([&] { read_model(wv); }) == "model: format version mismatch: expected 1, found 7");
}
