#include "copydetect/indices.hpp"
#include "copydetect/parallel.hpp"
#include "copydetect/results_io.hpp"
#include "copydetect/simulate.hpp"

#include <doctest.h>

#include <sstream>
#include <stdexcept>

using namespace copydetect;

namespace {

struct ThreadGuard {
    ~ThreadGuard() { set_num_threads(0); }
};

} // namespace

TEST_CASE("parallel_for rethrows the lowest failing index") {
    ThreadGuard guard;
    set_num_threads(4);
    std::vector<int> hit(100, 0);
    CHECK_THROWS_WITH(parallel_for(100,
                                   [&](std::size_t i) {
                                       hit[i] = 1;
                                       if (i == 37 || i == 80)
                                           throw std::runtime_error("fail " + std::to_string(i));
                                   }),
                      "fail 37");
}

TEST_CASE("E-step agrees with the serial reference") {
    ThreadGuard guard;
    Rng rng(10);
    const auto exam = sim::random_exam(15, 4, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 500, 5, rng);
    const auto ref = serial::e_step(exam.model, data);
    for (int threads : {1, 3}) {
        set_num_threads(threads);
        const auto par = e_step(exam.model, data);
        CHECK(par.loglik == ref.loglik);
        CHECK(par.counts == ref.counts);
    }
}

TEST_CASE("room detection agrees with the serial reference at any thread count") {
    ThreadGuard guard;
    Rng rng(11);
    const auto exam = sim::random_exam(15, 4, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 40, 2, rng);
    const auto table = nominal_table(exam.model, data);
    const auto members = data.room_members("r1");
    for (const auto& v : {IndexVariant::parse("omega2"), IndexVariant::parse("omega1s")}) {
        const auto ref = serial::detect_room(data, table, members, v);
        std::ostringstream want;
        write_pair_results(want, ref.results);
        for (int threads : {1, 2, 4}) {
            set_num_threads(threads);
            const auto par = detect_room(data, table, members, v);
            std::ostringstream got;
            write_pair_results(got, par.results);
            CHECK(got.str() == want.str());
        }
    }
}

TEST_CASE("protocol output does not depend on the thread count") {
    ThreadGuard guard;
    Rng rng(12);
    const auto exam = sim::random_exam(12, 3, rng);
    const auto data = sim::generate_synthetic(exam.model, exam.design, 200, 4, rng);
    const auto omega = nominal_table(exam.model, data);
    const auto wes = fit_wesolowsky(data);
    const auto gamma = wesolowsky_table(wes, data);
    sim::SimulationConfig cfg;
    cfg.num_pairs = 250;
    cfg.copy_levels = {2, 6};
    std::string first;
    for (int threads : {1, 2, 5}) {
        set_num_threads(threads);
        const auto res = sim::run_protocol(data, {&omega, &gamma}, cfg);
        std::ostringstream out;
        write_type1_csv(out, res);
        write_power_csv(out, res);
        if (first.empty())
            first = out.str();
        CHECK(out.str() == first);
    }
}

TEST_CASE("thread count from the environment") {
    setenv("COPYDETECT_THREADS", "3", 1);
    CHECK(threads_from_env() == 3);
    setenv("COPYDETECT_THREADS", "zero", 1);
    CHECK(threads_from_env() == 0);
    unsetenv("COPYDETECT_THREADS");
    CHECK(threads_from_env() == 0);
}
