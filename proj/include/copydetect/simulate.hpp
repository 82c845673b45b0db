#pragma once

#include "copydetect/dataio.hpp"
#include "copydetect/indices.hpp"
#include "copydetect/nominal.hpp"
#include "copydetect/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Monte-Carlo validation: students from different rooms cannot have copied
// from each other, so cross-room pairs give the empirical type-I error rate.
// Overwriting k of the copier's answers with the source's gives the power at
// copying level k.

namespace copydetect::sim {

struct SimulationConfig {
    std::size_t num_pairs = 100000;
    double alpha = 0.001;
    std::vector<std::size_t> copy_levels; ///< empty: default_copy_levels(N)
    std::vector<IndexVariant> variants;   ///< empty: all eight
    std::uint64_t seed = 1;
    DetectOptions detect;
};

/// 1, 5, 10, 15, ..., with N appended when it is not a multiple of 5.
std::vector<std::size_t> default_copy_levels(std::size_t num_questions);

struct OrderedPair {
    std::size_t copier;
    std::size_t source;
    bool operator==(const OrderedPair&) const = default;
};

/// `count` distinct ordered pairs with different room ids, uniform over all
/// such pairs. Throws std::invalid_argument stating the maximum when fewer
/// exist.
std::vector<OrderedPair> sample_cross_room_pairs(const ResponseMatrix& matrix, std::size_t count, Rng& rng);

/// Copies the source's answers (missing included) onto `positions`.
std::vector<Answer> inject_copy_at(std::span<const Answer> copier, std::span<const Answer> source,
                                   std::span<const std::size_t> positions);
/// Picks k positions uniformly without replacement (partial Fisher-Yates, so
/// equal generator states give nested position sets for growing k).
std::vector<Answer> inject_copy(std::span<const Answer> copier, std::span<const Answer> source, std::size_t k,
                                Rng& rng);

struct RateEstimate {
    std::size_t rejections = 0;
    std::size_t trials = 0;
    double rate = 0.0;
    double se = 0.0;

    double per_thousand() const { return 1000.0 * rate; }
    static RateEstimate from_counts(std::size_t rejections, std::size_t trials);
};

struct PowerCurve {
    IndexVariant variant;
    std::vector<std::size_t> levels;
    std::vector<RateEstimate> power;
};

struct ProtocolResult {
    std::vector<IndexVariant> variants;
    std::vector<RateEstimate> type1; ///< per variant
    std::vector<PowerCurve> curves;  ///< per variant
};

/// Tables for both families; a variant whose table is missing is an error.
struct ModelTables {
    const ProbabilityTable* omega = nullptr;
    const ProbabilityTable* gamma = nullptr;

    const ProbabilityTable& for_family(Family f) const;
};

/// The whole protocol: one set of null pairs, the same per-pair copy
/// positions at every level. Pairs with an ineligible student are dropped
/// before sampling. OpenMP over pairs; counts are integers so results do
/// not depend on the thread count.
ProtocolResult run_protocol(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config);

RateEstimate type1_rate(const ResponseMatrix& matrix, IndexVariant variant, const ProbabilityTable& table,
                        const SimulationConfig& config);
PowerCurve power_curve(const ResponseMatrix& matrix, IndexVariant variant, const ProbabilityTable& table,
                       const SimulationConfig& config);

namespace serial {
ProtocolResult run_protocol(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config);
} // namespace serial

/// Random nominal-model exam: the key option has the largest slope on every
/// item.
struct SyntheticExam {
    ExamDesign design;
    NominalModel model;
};
SyntheticExam random_exam(std::size_t num_items, std::size_t num_options, Rng& rng,
                          std::size_t quadrature_nodes = 21);

/// Independent examinees with theta ~ N(0,1) answering by the model's option
/// probabilities; rooms assigned round-robin. True abilities go to `thetas`
/// when non-null.
ResponseMatrix generate_synthetic(const NominalModel& model, const ExamDesign& design, std::size_t num_students,
                                  std::size_t num_rooms, Rng& rng, std::vector<double>* thetas = nullptr);

} // namespace copydetect::sim
