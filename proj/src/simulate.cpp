#include "copydetect/simulate.hpp"
#include "copydetect/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace copydetect::sim {

namespace {

// Partial Fisher-Yates over 0..n-1; the first k entries are the chosen
// positions, and the prefix for k does not depend on how far the shuffle ran.
std::vector<std::size_t> copy_order(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t t = 0; t < k && t + 1 < n; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, n - 1);
        std::swap(idx[t], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

std::vector<OrderedPair> sample_among(const ResponseMatrix& matrix, std::span<const std::size_t> candidates,
                                      std::size_t count, Rng& rng) {
    std::unordered_map<std::string, std::size_t> room_index;
    std::vector<std::size_t> room_of(candidates.size());
    std::vector<std::size_t> room_size;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto& room = matrix.record(candidates[k]).room_id;
        auto [it, inserted] = room_index.try_emplace(room, room_size.size());
        if (inserted)
            room_size.push_back(0);
        room_of[k] = it->second;
        ++room_size[it->second];
    }
    const std::size_t n = candidates.size();
    std::size_t same_room = 0;
    for (std::size_t s : room_size)
        same_room += s * s;
    const std::size_t available = n * n - same_room;
    if (room_size.size() < 2)
        throw std::invalid_argument("cross-room pairs need at least 2 rooms");
    if (count > available)
        throw std::invalid_argument("requested " + std::to_string(count) + " cross-room pairs but at most " +
                                    std::to_string(available) + " exist");

    std::vector<OrderedPair> out;
    out.reserve(count);
    if (2 * count > available) {
        std::vector<OrderedPair> all;
        all.reserve(available);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (room_of[a] != room_of[b])
                    all.push_back({candidates[a], candidates[b]});
        for (std::size_t t = 0; t < count; ++t) {
            std::uniform_int_distribution<std::size_t> pick(t, all.size() - 1);
            std::swap(all[t], all[pick(rng)]);
        }
        all.resize(count);
        return all;
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2 * count);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (out.size() < count) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        if (room_of[a] == room_of[b])
            continue;
        if (!seen.insert(static_cast<std::uint64_t>(a) * n + b).second)
            continue;
        out.push_back({candidates[a], candidates[b]});
    }
    return out;
}

struct Plan {
    std::vector<IndexVariant> variants;
    std::vector<std::size_t> levels;
    std::vector<OrderedPair> pairs;
    std::size_t columns() const { return variants.size() * (levels.size() + 1); }
};

Plan make_plan(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config,
               std::vector<IndexVariant> variants, std::vector<std::size_t> levels) {
    if (config.num_pairs == 0)
        throw std::invalid_argument("num_pairs must be >= 1");
    if (!(config.alpha > 0.0 && config.alpha <= 1.0))
        throw std::invalid_argument("alpha must lie in (0,1]");
    const std::size_t n_items = matrix.design().num_questions();
    for (std::size_t k : levels) {
        if (k > n_items)
            throw std::invalid_argument("copy level " + std::to_string(k) + " exceeds the " +
                                        std::to_string(n_items) + " questions");
    }
    Plan plan{std::move(variants), std::move(levels), {}};
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < matrix.size(); ++j) {
        bool ok = true;
        for (const auto& v : plan.variants) {
            const auto& t = tables.for_family(v.family);
            if (t.num_students() != matrix.size())
                throw std::invalid_argument("probability table does not match the response matrix");
            ok = ok && t.eligible(j);
        }
        if (ok)
            candidates.push_back(j);
    }
    Rng rng = stream_rng(config.seed, 0);
    plan.pairs = sample_among(matrix, candidates, config.num_pairs, rng);
    return plan;
}

struct CachedProfile {
    std::vector<char> scored;
    pbd::MatchProfile profile;
    std::vector<double> tails;
};

// Writes one row of rejection indicators: for each variant, column 0 is the
// untouched pair and column 1 + l is copy level levels[l].
void evaluate_pair(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config,
                   const Plan& plan, std::size_t pair_index, unsigned char* row) {
    const auto [c, s] = plan.pairs[pair_index];
    const auto& copier = matrix.record(c).responses;
    const auto& source = matrix.record(s).responses;
    const std::size_t n_items = copier.size();
    const std::size_t max_level = plan.levels.empty() ? 0 : *std::max_element(plan.levels.begin(), plan.levels.end());
    Rng rng = stream_rng(config.seed, 1 + pair_index);
    const auto order = copy_order(n_items, max_level, rng);

    std::vector<std::vector<Answer>> injected;
    injected.reserve(plan.levels.size() + 1);
    injected.push_back(copier);
    for (std::size_t k : plan.levels)
        injected.push_back(inject_copy_at(copier, source, std::span(order).first(k)));

    const std::size_t width = plan.levels.size() + 1;
    for (std::size_t vi = 0; vi < plan.variants.size(); ++vi) {
        const auto& variant = plan.variants[vi];
        const auto& table = tables.for_family(variant.family);
        std::vector<CachedProfile> cache;
        for (std::size_t l = 0; l < width; ++l) {
            const auto& cv = injected[l];
            std::vector<char> scored(n_items);
            bool any = false;
            for (std::size_t i = 0; i < n_items; ++i) {
                scored[i] = cv[i] != kMissing && source[i] != kMissing;
                any = any || scored[i];
            }
            if (!any) {
                row[vi * width + l] = config.alpha >= 1.0;
                continue;
            }
            auto hit = std::find_if(cache.begin(), cache.end(), [&](const CachedProfile& p) { return p.scored == scored; });
            if (hit == cache.end()) {
                auto profile = match_profile(variant.conditioning, table.student(c), table.student(s), cv, source,
                                             table.num_options());
                auto tails = variant.tail == Tail::exact ? pbd::upper_tails(profile.pis()) : std::vector<double>{};
                cache.push_back({std::move(scored), std::move(profile), std::move(tails)});
                hit = cache.end() - 1;
            }
            const std::size_t m = count_matches(cv, source);
            const double p = variant.tail == Tail::exact
                                 ? hit->tails[m]
                                 : standardized_p(hit->profile, m, config.detect.continuity_correction).p;
            row[vi * width + l] = p <= config.alpha;
        }
    }
}

ProtocolResult summarize(const Plan& plan, const std::vector<unsigned char>& flags) {
    ProtocolResult out;
    out.variants = plan.variants;
    const std::size_t width = plan.levels.size() + 1;
    const std::size_t cols = plan.columns();
    std::vector<std::size_t> totals(cols, 0);
    for (std::size_t p = 0; p < plan.pairs.size(); ++p)
        for (std::size_t k = 0; k < cols; ++k)
            totals[k] += flags[p * cols + k];
    const std::size_t n = plan.pairs.size();
    for (std::size_t vi = 0; vi < plan.variants.size(); ++vi) {
        out.type1.push_back(RateEstimate::from_counts(totals[vi * width], n));
        PowerCurve curve{plan.variants[vi], plan.levels, {}};
        for (std::size_t l = 0; l < plan.levels.size(); ++l)
            curve.power.push_back(RateEstimate::from_counts(totals[vi * width + 1 + l], n));
        out.curves.push_back(std::move(curve));
    }
    return out;
}

std::vector<IndexVariant> resolve_variants(const SimulationConfig& config) {
    if (!config.variants.empty())
        return config.variants;
    const auto all = IndexVariant::all();
    return {all.begin(), all.end()};
}

std::vector<std::size_t> resolve_levels(const ResponseMatrix& matrix, const SimulationConfig& config) {
    return config.copy_levels.empty() ? default_copy_levels(matrix.design().num_questions()) : config.copy_levels;
}

ProtocolResult run_parallel(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config,
                            std::vector<IndexVariant> variants, std::vector<std::size_t> levels) {
    const Plan plan = make_plan(matrix, tables, config, std::move(variants), std::move(levels));
    std::vector<unsigned char> flags(plan.pairs.size() * plan.columns(), 0);
    parallel_for(plan.pairs.size(),
                 [&](std::size_t p) { evaluate_pair(matrix, tables, config, plan, p, flags.data() + p * plan.columns()); });
    return summarize(plan, flags);
}

} // namespace

std::vector<std::size_t> default_copy_levels(std::size_t num_questions) {
    std::vector<std::size_t> levels{1};
    for (std::size_t k = 5; k <= num_questions; k += 5)
        levels.push_back(k);
    if (levels.back() != num_questions)
        levels.push_back(num_questions);
    return levels;
}

std::vector<OrderedPair> sample_cross_room_pairs(const ResponseMatrix& matrix, std::size_t count, Rng& rng) {
    std::vector<std::size_t> all(matrix.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return sample_among(matrix, all, count, rng);
}

std::vector<Answer> inject_copy_at(std::span<const Answer> copier, std::span<const Answer> source,
                                   std::span<const std::size_t> positions) {
    if (copier.size() != source.size())
        throw std::invalid_argument("inject_copy: answer vectors differ in length");
    std::vector<Answer> out(copier.begin(), copier.end());
    for (std::size_t i : positions) {
        if (i >= out.size())
            throw std::out_of_range("inject_copy: position " + std::to_string(i) + " out of range");
        out[i] = source[i];
    }
    return out;
}

std::vector<Answer> inject_copy(std::span<const Answer> copier, std::span<const Answer> source, std::size_t k,
                                Rng& rng) {
    if (k > copier.size())
        throw std::out_of_range("inject_copy: k=" + std::to_string(k) + " exceeds " + std::to_string(copier.size()) +
                                " questions");
    const auto positions = copy_order(copier.size(), k, rng);
    return inject_copy_at(copier, source, positions);
}

RateEstimate RateEstimate::from_counts(std::size_t rejections, std::size_t trials) {
    RateEstimate r;
    r.rejections = rejections;
    r.trials = trials;
    if (trials > 0) {
        r.rate = static_cast<double>(rejections) / static_cast<double>(trials);
        r.se = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(trials));
    }
    return r;
}

const ProbabilityTable& ModelTables::for_family(Family f) const {
    const ProbabilityTable* t = f == Family::omega ? omega : gamma;
    if (!t)
        throw std::invalid_argument(std::string("no ") + (f == Family::omega ? "nominal" : "Wesolowsky") +
                                    " probability table supplied");
    if (t->family() != f)
        throw std::invalid_argument("probability table family mismatch");
    return *t;
}

ProtocolResult run_protocol(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config) {
    return run_parallel(matrix, tables, config, resolve_variants(config), resolve_levels(matrix, config));
}

RateEstimate type1_rate(const ResponseMatrix& matrix, IndexVariant variant, const ProbabilityTable& table,
                        const SimulationConfig& config) {
    ModelTables tables;
    (variant.family == Family::omega ? tables.omega : tables.gamma) = &table;
    return run_parallel(matrix, tables, config, {variant}, {}).type1.front();
}

PowerCurve power_curve(const ResponseMatrix& matrix, IndexVariant variant, const ProbabilityTable& table,
                       const SimulationConfig& config) {
    ModelTables tables;
    (variant.family == Family::omega ? tables.omega : tables.gamma) = &table;
    return run_parallel(matrix, tables, config, {variant}, resolve_levels(matrix, config)).curves.front();
}

namespace serial {

ProtocolResult run_protocol(const ResponseMatrix& matrix, const ModelTables& tables, const SimulationConfig& config) {
    const Plan plan = make_plan(matrix, tables, config, resolve_variants(config), resolve_levels(matrix, config));
    std::vector<unsigned char> flags(plan.pairs.size() * plan.columns(), 0);
    for (std::size_t p = 0; p < plan.pairs.size(); ++p)
        evaluate_pair(matrix, tables, config, plan, p, flags.data() + p * plan.columns());
    return summarize(plan, flags);
}

} // namespace serial

SyntheticExam random_exam(std::size_t num_items, std::size_t num_options, Rng& rng, std::size_t quadrature_nodes) {
    std::uniform_int_distribution<int> pick_key(0, static_cast<int>(num_options) - 1);
    std::uniform_real_distribution<double> key_slope(0.8, 1.8);
    std::uniform_real_distribution<double> wrong_slope(-0.8, 0.2);
    std::normal_distribution<double> intercept(0.0, 0.6);

    std::vector<Answer> key(num_items);
    NominalModel model(num_items, num_options, gauss_hermite_normal(quadrature_nodes));
    for (std::size_t i = 0; i < num_items; ++i) {
        key[i] = static_cast<Answer>(pick_key(rng));
        auto xi = model.intercepts(i);
        auto la = model.slopes(i);
        for (std::size_t v = 0; v < num_options; ++v) {
            xi[v] = intercept(rng);
            la[v] = wrong_slope(rng);
        }
        la[static_cast<std::size_t>(key[i])] = key_slope(rng);
        xi[static_cast<std::size_t>(key[i])] += 0.5;
    }
    model.center();
    return {ExamDesign(num_options, std::move(key)), std::move(model)};
}

ResponseMatrix generate_synthetic(const NominalModel& model, const ExamDesign& design, std::size_t num_students,
                                  std::size_t num_rooms, Rng& rng, std::vector<double>* thetas) {
    if (model.num_items() != design.num_questions() || model.num_options() != design.num_options())
        throw std::invalid_argument("generator model does not match the exam design");
    if (num_rooms == 0)
        throw std::invalid_argument("need at least one room");
    std::normal_distribution<double> ability(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t id_width = std::to_string(num_students).size();
    const std::size_t room_width = std::to_string(num_rooms).size();
    auto padded = [](std::size_t v, std::size_t width) {
        std::string s = std::to_string(v);
        return std::string(width - std::min(width, s.size()), '0') + s;
    };

    std::vector<StudentRecord> records;
    records.reserve(num_students);
    if (thetas)
        thetas->clear();
    std::vector<double> p(model.num_options());
    for (std::size_t j = 0; j < num_students; ++j) {
        const double theta = ability(rng);
        if (thetas)
            thetas->push_back(theta);
        StudentRecord rec;
        rec.student_id = "s" + padded(j + 1, id_width);
        rec.room_id = "r" + padded(j % num_rooms + 1, room_width);
        rec.responses.resize(model.num_items());
        for (std::size_t i = 0; i < model.num_items(); ++i) {
            model.probabilities(theta, i, p);
            const double u = unit(rng);
            double acc = 0.0;
            std::size_t v = 0;
            for (; v + 1 < p.size(); ++v) {
                acc += p[v];
                if (u < acc)
                    break;
            }
            rec.responses[i] = static_cast<Answer>(v);
        }
        records.push_back(std::move(rec));
    }
    return ResponseMatrix(design, std::move(records));
}

} // namespace copydetect::sim
