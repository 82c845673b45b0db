// Serial reference kernels against their OpenMP counterparts. Thread count
// follows OMP_NUM_THREADS / COPYDETECT_THREADS.

#include "copydetect/indices.hpp"
#include "copydetect/nominal.hpp"
#include "copydetect/parallel.hpp"
#include "copydetect/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace copydetect;

namespace {

struct Workload {
    sim::SyntheticExam exam;
    ResponseMatrix data;
    ProbabilityTable omega;

    Workload() : exam(make_exam()), data(make_data(exam)), omega(nominal_table(exam.model, data)) {}

    static sim::SyntheticExam make_exam() {
        Rng rng(1);
        return sim::random_exam(48, 4, rng);
    }
    static ResponseMatrix make_data(const sim::SyntheticExam& e) {
        Rng rng(2);
        return sim::generate_synthetic(e.model, e.design, 2000, 20, rng);
    }
};

const Workload& workload() {
    static const Workload w;
    return w;
}

void BM_EStepSerial(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state)
        benchmark::DoNotOptimize(serial::e_step(w.exam.model, w.data));
}

void BM_EStepParallel(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state)
        benchmark::DoNotOptimize(e_step(w.exam.model, w.data));
}

void BM_RoomSerial(benchmark::State& state) {
    const auto& w = workload();
    const auto members = w.data.room_members("r01");
    const auto v = IndexVariant::parse("omega2");
    for (auto _ : state)
        benchmark::DoNotOptimize(serial::detect_room(w.data, w.omega, members, v));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(members.size() * (members.size() - 1)));
}

void BM_RoomParallel(benchmark::State& state) {
    const auto& w = workload();
    const auto members = w.data.room_members("r01");
    const auto v = IndexVariant::parse("omega2");
    for (auto _ : state)
        benchmark::DoNotOptimize(detect_room(w.data, w.omega, members, v));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(members.size() * (members.size() - 1)));
}

sim::SimulationConfig protocol_config() {
    sim::SimulationConfig cfg;
    cfg.num_pairs = 5000;
    cfg.copy_levels = {1, 10, 25, 48};
    cfg.variants = {IndexVariant::parse("omega2"), IndexVariant::parse("omega2s")};
    return cfg;
}

void BM_ProtocolSerial(benchmark::State& state) {
    const auto& w = workload();
    const auto cfg = protocol_config();
    for (auto _ : state)
        benchmark::DoNotOptimize(sim::serial::run_protocol(w.data, {&w.omega, nullptr}, cfg));
}

void BM_ProtocolParallel(benchmark::State& state) {
    const auto& w = workload();
    const auto cfg = protocol_config();
    for (auto _ : state)
        benchmark::DoNotOptimize(sim::run_protocol(w.data, {&w.omega, nullptr}, cfg));
}

} // namespace

BENCHMARK(BM_EStepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RoomSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RoomParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProtocolSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProtocolParallel)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
    set_num_threads(threads_from_env());
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv))
        return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
