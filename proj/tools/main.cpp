// copydetect: fit response models, score student pairs, flag rooms and run
// Monte-Carlo size/power studies from the command line.

#include "manifest.hpp"

#include "copydetect/dataio.hpp"
#include "copydetect/indices.hpp"
#include "copydetect/model_io.hpp"
#include "copydetect/mtp.hpp"
#include "copydetect/nominal.hpp"
#include "copydetect/parallel.hpp"
#include "copydetect/results_io.hpp"
#include "copydetect/simulate.hpp"
#include "copydetect/wesolowsky.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace copydetect;
using copydetect::cli::RunManifest;
using copydetect::cli::StagedFile;

namespace {

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct FitFlags {
    std::size_t quadrature_nodes = 21;
    std::size_t max_cycles = 200;
    double tolerance = 1e-4;
    std::size_t min_examinees = 200;

    void attach(CLI::App* app) {
        app->add_option("--quadrature-nodes", quadrature_nodes, "Gauss-Hermite nodes for the ability prior")
            ->capture_default_str()
            ->check(CLI::Range(3, 201));
        app->add_option("--max-cycles", max_cycles, "EM cycle cap")->capture_default_str();
        app->add_option("--tolerance", tolerance, "EM convergence threshold on max |parameter change|")
            ->capture_default_str();
        app->add_option("--min-examinees", min_examinees, "refuse to fit the nominal model below this many records")
            ->capture_default_str();
    }
    NominalFitConfig config() const {
        NominalFitConfig c;
        c.quadrature_nodes = quadrature_nodes;
        c.max_cycles = max_cycles;
        c.tolerance = tolerance;
        c.min_examinees = min_examinees;
        return c;
    }
    void record(nlohmann::json& flags) const {
        flags["quadrature_nodes"] = quadrature_nodes;
        flags["max_cycles"] = max_cycles;
        flags["tolerance"] = tolerance;
        flags["min_examinees"] = min_examinees;
    }
};

int apply_threads(int requested) {
    const int n = requested > 0 ? requested : threads_from_env();
    set_num_threads(n);
    return max_threads();
}

std::vector<IndexVariant> parse_variants(const std::string& spec) {
    if (spec == "all") {
        const auto a = IndexVariant::all();
        return {a.begin(), a.end()};
    }
    std::vector<IndexVariant> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(IndexVariant::parse(item));
    if (out.empty())
        throw std::invalid_argument("no index variant given");
    return out;
}

std::vector<std::size_t> parse_levels(const std::string& spec) {
    std::vector<std::size_t> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const unsigned long v = std::stoul(item, &used);
        if (used != item.size())
            throw std::invalid_argument("bad copy level '" + item + "'");
        out.push_back(v);
    }
    return out;
}

struct SyntheticSpec {
    std::size_t items = 48;
    std::size_t options = 4;
    std::size_t students = 2000;
    std::size_t rooms = 20;
};

SyntheticSpec parse_synthetic(const std::string& spec) {
    const std::string prefix = "nrm:";
    if (spec.rfind(prefix, 0) != 0)
        throw std::invalid_argument("--synthetic expects nrm:items=..,n=..,students=..,rooms=..");
    SyntheticSpec s;
    std::stringstream ss(spec.substr(prefix.size()));
    std::string kv;
    while (std::getline(ss, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--synthetic: expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::size_t value = std::stoul(kv.substr(eq + 1));
        if (key == "items")
            s.items = value;
        else if (key == "n")
            s.options = value;
        else if (key == "students")
            s.students = value;
        else if (key == "rooms")
            s.rooms = value;
        else
            throw std::invalid_argument("--synthetic: unknown key '" + key + "'");
    }
    if (s.items == 0 || s.students == 0 || s.rooms == 0)
        throw std::invalid_argument("--synthetic: items, students and rooms must be positive");
    return s;
}

struct Models {
    std::optional<ExamDesign> design;
    std::optional<NominalModel> nominal;
    std::optional<WesolowskyModel> wesolowsky;
};

Models load_models(const std::vector<std::string>& paths, RunManifest& manifest) {
    Models m;
    for (const auto& p : paths) {
        manifest.add_input("model", p);
        auto loaded = load_model(p);
        if (m.design && !(*m.design == loaded.design))
            throw std::invalid_argument("model files were fitted on different exams (fingerprints " +
                                        m.design->fingerprint_hex() + " and " + loaded.design.fingerprint_hex() +
                                        ")");
        m.design = loaded.design;
        if (loaded.is_nominal())
            m.nominal = loaded.nominal();
        else
            m.wesolowsky = loaded.wesolowsky();
    }
    return m;
}

void require_families(const Models& m, const std::vector<IndexVariant>& variants) {
    for (const auto& v : variants) {
        if (v.family == Family::omega && !m.nominal)
            throw std::invalid_argument("variant " + v.name() + " needs a nominal model file");
        if (v.family == Family::gamma && !m.wesolowsky)
            throw std::invalid_argument("variant " + v.name() + " needs a Wesolowsky model file");
    }
}

/// Runs `body` under the manifest's bookkeeping: status goes from incomplete
/// to complete, or to failed with the error message.
int guarded(RunManifest& manifest, const std::function<void()>& body) {
    try {
        manifest.start();
        body();
        manifest.complete();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "copydetect: error: " << e.what() << '\n';
        try {
            manifest.fail(e.what());
        } catch (const std::exception& inner) {
            std::cerr << "copydetect: could not record failure: " << inner.what() << '\n';
        }
        return 1;
    }
}

// ---------------------------------------------------------------- fit

struct FitCmd {
    std::string model = "nrm";
    std::string responses, key, out;
    std::size_t options = 4;
    std::uint64_t seed = 1;
    int threads = 0;
    FitFlags fit;

    void attach(CLI::App* app) {
        app->add_option("--model", model, "model family")->check(CLI::IsMember({"nrm", "wesolowsky"}))
            ->capture_default_str();
        app->add_option("--responses", responses, "response CSV (student_id,room_id,answers)")->required();
        app->add_option("--key", key, "answer key file")->required();
        app->add_option("--options", options, "options per question")->capture_default_str()->check(CLI::Range(2, 26));
        app->add_option("--out", out, "model file to write")->required();
        app->add_option("--seed", seed, "recorded in the manifest; fitting itself is deterministic")
            ->capture_default_str();
        app->add_option("--threads", threads, "worker threads (default: COPYDETECT_THREADS or all cores)");
        fit.attach(app);
    }

    int run(const std::vector<std::string>& argv) const {
        RunManifest manifest(out + ".manifest.json", "fit", argv);
        manifest.flags() = {{"model", model}, {"responses", responses}, {"key", key}, {"options", options},
                            {"out", out}};
        fit.record(manifest.flags());
        manifest.set_seed(seed);
        return guarded(manifest, [&] {
            manifest.flags()["threads"] = apply_threads(threads);
            manifest.add_input("key", key);
            manifest.add_input("responses", responses);
            const auto design = parse_key(key, options);
            const auto matrix = parse_responses(responses, design);
            manifest.add_exam(design.fingerprint_hex());
            manifest.add_output("model", out);

            StagedFile file(out);
            if (model == "nrm") {
                const auto result = fit_nominal_mml(matrix, fit.config());
                const double ll = result.loglik_trace.empty() ? 0.0 : result.loglik_trace.back();
                write_model(file.stream(), design, result.model,
                            NominalFitSummary{result.converged, result.cycles, ll});
                file.commit();
                std::size_t pinned = 0, degenerate = 0;
                for (std::size_t i = 0; i < result.model.num_items(); ++i) {
                    pinned += result.model.status(i) == ItemStatus::unused_option_pinned;
                    degenerate += result.model.status(i) == ItemStatus::degenerate_uniform;
                }
                std::cout << "nominal model: " << matrix.size() << " examinees, " << design.num_questions()
                          << " items, " << (result.converged ? "converged" : "hit the cycle cap") << " after "
                          << result.cycles << " cycles, log-likelihood " << g6(ll) << '\n';
                if (pinned + degenerate > 0)
                    std::cerr << "warning: " << pinned << " items with pinned unused options, " << degenerate
                              << " degenerate items fitted as uniform\n";
            } else {
                const auto result = fit_wesolowsky(matrix);
                write_model(file.stream(), result);
                file.commit();
                std::map<std::string, std::size_t> counts;
                for (const auto& s : result.students)
                    ++counts[to_string(s.status)];
                std::cout << "Wesolowsky model: " << matrix.size() << " students, " << design.num_questions()
                          << " items";
                for (const auto& [status, n] : counts)
                    std::cout << ", " << status << "=" << n;
                std::cout << '\n';
            }
        });
    }
};

// ---------------------------------------------------------------- detect

struct DetectCmd {
    std::vector<std::string> models;
    std::string responses, key, out;
    std::string variant = "omega2s";
    double alpha = 0.001;
    bool continuity = false;
    int threads = 0;

    void attach(CLI::App* app) {
        app->add_option("--model", models, "model file(s); give one of each family for --variant all")
            ->required();
        app->add_option("--responses", responses, "response CSV")->required();
        app->add_option("--key", key, "answer key; must match the exam the models were fitted on");
        app->add_option("--variant", variant, "index variant, comma list, or 'all'")->capture_default_str();
        app->add_option("--alpha", alpha, "significance level used for the console summary")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--out", out, "pair results CSV")->required();
        app->add_flag("--continuity-correction", continuity, "half-point correction in standardized variants");
        app->add_option("--threads", threads, "worker threads");
    }

    int run(const std::vector<std::string>& argv) const {
        RunManifest manifest(out + ".manifest.json", "detect", argv);
        manifest.flags() = {{"model", models},       {"responses", responses}, {"key", key},
                            {"variant", variant},    {"alpha", alpha},         {"out", out},
                            {"continuity_correction", continuity}};
        return guarded(manifest, [&] {
            manifest.flags()["threads"] = apply_threads(threads);
            const auto variants = parse_variants(variant);
            const Models m = load_models(models, manifest);
            require_families(m, variants);
            const ExamDesign& design = *m.design;
            if (!key.empty()) {
                manifest.add_input("key", key);
                const auto given = parse_key(key, design.num_options());
                if (!(given == design))
                    throw std::invalid_argument("exam fingerprint mismatch: key " + key + " has fingerprint " +
                                                given.fingerprint_hex() + " but the model was fitted on " +
                                                design.fingerprint_hex() + "; refusing to run");
            }
            manifest.add_exam(design.fingerprint_hex());
            manifest.add_input("responses", responses);
            const auto matrix = parse_responses(responses, design);

            std::optional<ProbabilityTable> omega, gamma;
            if (m.nominal)
                omega = nominal_table(*m.nominal, matrix);
            if (m.wesolowsky)
                gamma = wesolowsky_table(*m.wesolowsky, matrix);

            const DetectOptions opts{continuity};
            manifest.add_output("pair_results", out);
            StagedFile file(out);
            write_pair_results_header(file.stream());
            std::set<std::string> warned;
            for (const auto& v : variants) {
                const auto& table = v.family == Family::omega ? *omega : *gamma;
                const auto rooms = detect_all_rooms(matrix, table, v, opts);
                std::size_t pairs = 0, flagged = 0;
                double lowest = 1.0;
                for (const auto& room : rooms) {
                    if (room.skipped && warned.insert(room.room_id).second)
                        std::cerr << "warning: room " << room.room_id << " has " << room.eligible_students
                                  << " eligible student(s); skipped\n";
                    write_pair_results(file.stream(), room.results);
                    for (const auto& r : room.results) {
                        ++pairs;
                        flagged += r.p_value <= alpha;
                        lowest = std::min(lowest, r.p_value);
                    }
                }
                std::cout << v.name() << ": " << pairs << " ordered pairs, " << flagged << " with p <= "
                          << g6(alpha) << ", smallest p " << g6(lowest) << '\n';
            }
            file.commit();
        });
    }
};

// ---------------------------------------------------------------- rooms

struct RoomsCmd {
    std::string results, out, variant;
    double p_star = mtp::kDefaultPStar;
    double threshold = mtp::kDefaultThreshold;
    std::string suspect = "copier";
    int threads = 0;

    void attach(CLI::App* app) {
        app->add_option("--results", results, "pair results CSV from detect")->required();
        app->add_option("--out", out, "room report CSV")->required();
        app->add_option("--variant", variant, "which variant to use when the results hold several");
        app->add_option("--p-star", p_star, "BH false-discovery level per room")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--threshold", threshold, "suspected share above which a room is flagged")
            ->capture_default_str();
        app->add_option("--suspect", suspect, "copier: copier role only; either: both roles")
            ->check(CLI::IsMember({"copier", "either"}))
            ->capture_default_str();
        app->add_option("--threads", threads, "worker threads");
    }

    int run(const std::vector<std::string>& argv) const {
        RunManifest manifest(out + ".manifest.json", "rooms", argv);
        manifest.flags() = {{"results", results}, {"out", out},         {"variant", variant},
                            {"p_star", p_star},   {"threshold", threshold}, {"suspect", suspect}};
        return guarded(manifest, [&] {
            manifest.flags()["threads"] = apply_threads(threads);
            manifest.add_input("pair_results", results);
            std::ifstream in(results);
            if (!in)
                throw FormatError("cannot open " + results);
            auto all = read_pair_results(in);

            std::set<std::string> names;
            for (const auto& r : all)
                names.insert(r.variant.name());
            if (!variant.empty()) {
                const auto want = IndexVariant::parse(variant);
                std::erase_if(all, [&](const PairResult& r) { return !(r.variant == want); });
            } else if (names.size() > 1) {
                throw std::invalid_argument("results hold " + std::to_string(names.size()) +
                                            " variants; choose one with --variant");
            }

            std::vector<RoomDetection> rooms;
            std::vector<mtp::RoomMeta> meta;
            std::map<std::string, std::size_t> index;
            std::vector<std::set<std::string>> students;
            for (auto& r : all) {
                auto [it, inserted] = index.try_emplace(r.room_id, rooms.size());
                if (inserted) {
                    rooms.push_back(RoomDetection{r.room_id, 0, false, {}});
                    students.emplace_back();
                }
                students[it->second].insert(r.copier_id);
                students[it->second].insert(r.source_id);
                rooms[it->second].results.push_back(std::move(r));
            }
            for (std::size_t k = 0; k < rooms.size(); ++k)
                meta.push_back({rooms[k].room_id, students[k].size()});

            const auto rule = suspect == "copier" ? mtp::SuspectRule::copier : mtp::SuspectRule::either_role;
            const auto reports = mtp::room_reports(rooms, meta, p_star, threshold, rule);
            manifest.add_output("room_reports", out);
            StagedFile file(out);
            write_room_reports(file.stream(), reports);
            file.commit();

            const auto summary = mtp::massive_summary(reports);
            std::cout << summary.flagged << " of " << summary.rooms << " rooms flagged (proportion "
                      << g6(summary.proportion) << ") at p* = " << g6(p_star) << ", threshold " << g6(threshold)
                      << '\n';
        });
    }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
    std::string responses, key, synthetic, out_dir;
    std::vector<std::string> models;
    std::size_t options = 4;
    std::size_t pairs = 100000;
    double alpha = 0.001;
    std::string levels = "default";
    std::string variant = "all";
    std::uint64_t seed = 1;
    bool continuity = false;
    bool write_data = false;
    int threads = 0;
    FitFlags fit;

    void attach(CLI::App* app) {
        auto* resp = app->add_option("--responses", responses, "response CSV");
        auto* syn = app->add_option("--synthetic", synthetic,
                                    "generate data instead: nrm:items=48,n=4,students=2000,rooms=20");
        resp->excludes(syn);
        app->add_option("--key", key, "answer key (with --responses)");
        app->add_option("--options", options, "options per question (with --responses)")
            ->capture_default_str()
            ->check(CLI::Range(2, 26));
        app->add_option("--model", models, "pre-fitted model file(s); fitted on the data when omitted");
        app->add_option("--pairs", pairs, "cross-room null pairs")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--alpha", alpha, "significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
        app->add_option("--levels", levels, "copy levels k, comma list; 'default' is 1,5,10,...,N")
            ->capture_default_str();
        app->add_option("--variant", variant, "index variant, comma list, or 'all'")->capture_default_str();
        app->add_option("--seed", seed, "master seed")->capture_default_str();
        app->add_option("--out-dir", out_dir, "directory for type1.csv, power.csv and manifest.json")->required();
        app->add_flag("--continuity-correction", continuity, "half-point correction in standardized variants");
        app->add_flag("--write-data", write_data, "also save the synthetic key and responses");
        app->add_option("--threads", threads, "worker threads");
        fit.attach(app);
    }

    int run(const std::vector<std::string>& argv) const {
        const fs::path dir(out_dir);
        RunManifest manifest(dir / "manifest.json", "simulate", argv);
        manifest.flags() = {{"responses", responses}, {"key", key},          {"synthetic", synthetic},
                            {"model", models},        {"options", options},  {"pairs", pairs},
                            {"alpha", alpha},         {"levels", levels},    {"variant", variant},
                            {"out_dir", out_dir},     {"continuity_correction", continuity}};
        fit.record(manifest.flags());
        manifest.set_seed(seed);
        return guarded(manifest, [&] {
            manifest.flags()["threads"] = apply_threads(threads);
            const auto variants = parse_variants(variant);

            std::optional<ResponseMatrix> matrix;
            if (!synthetic.empty()) {
                const auto spec = parse_synthetic(synthetic);
                // Streams far above any pair index keep data generation apart
                // from the simulation's own draws.
                Rng exam_rng = stream_rng(seed, 0xD000000000000001ULL);
                Rng data_rng = stream_rng(seed, 0xD000000000000002ULL);
                const auto exam = sim::random_exam(spec.items, spec.options, exam_rng, fit.quadrature_nodes);
                matrix = sim::generate_synthetic(exam.model, exam.design, spec.students, spec.rooms, data_rng);
                if (write_data) {
                    StagedFile k(dir / "synthetic_key.txt");
                    write_key(k.stream(), exam.design);
                    k.commit();
                    StagedFile r(dir / "synthetic_responses.csv");
                    write_responses(r.stream(), *matrix);
                    r.commit();
                    manifest.add_output("synthetic_key", dir / "synthetic_key.txt");
                    manifest.add_output("synthetic_responses", dir / "synthetic_responses.csv");
                }
            } else {
                if (responses.empty() || key.empty())
                    throw std::invalid_argument("simulate needs --responses and --key, or --synthetic");
                manifest.add_input("key", key);
                manifest.add_input("responses", responses);
                matrix = parse_responses(responses, parse_key(key, options));
            }
            const auto& design = matrix->design();
            manifest.add_exam(design.fingerprint_hex());

            Models m = load_models(models, manifest);
            if (m.design && !(*m.design == design))
                throw std::invalid_argument("exam fingerprint mismatch between the model files and the data");
            const bool need_omega = std::any_of(variants.begin(), variants.end(),
                                                [](const IndexVariant& v) { return v.family == Family::omega; });
            const bool need_gamma = std::any_of(variants.begin(), variants.end(),
                                                [](const IndexVariant& v) { return v.family == Family::gamma; });
            if (need_omega && !m.nominal) {
                const auto result = fit_nominal_mml(*matrix, fit.config());
                std::cout << "fitted nominal model: " << (result.converged ? "converged" : "hit the cycle cap")
                          << " after " << result.cycles << " cycles\n";
                m.nominal = result.model;
            }
            if (need_gamma && !m.wesolowsky)
                m.wesolowsky = fit_wesolowsky(*matrix);

            std::optional<ProbabilityTable> omega, gamma;
            if (need_omega)
                omega = nominal_table(*m.nominal, *matrix);
            if (need_gamma)
                gamma = wesolowsky_table(*m.wesolowsky, *matrix);

            sim::SimulationConfig cfg;
            cfg.num_pairs = pairs;
            cfg.alpha = alpha;
            cfg.copy_levels = levels == "default" ? sim::default_copy_levels(design.num_questions())
                                                  : parse_levels(levels);
            cfg.variants = variants;
            cfg.seed = seed;
            cfg.detect.continuity_correction = continuity;
            const auto result =
                sim::run_protocol(*matrix, sim::ModelTables{omega ? &*omega : nullptr, gamma ? &*gamma : nullptr}, cfg);

            StagedFile t1(dir / "type1.csv");
            write_type1_csv(t1.stream(), result);
            StagedFile pw(dir / "power.csv");
            write_power_csv(pw.stream(), result);
            t1.commit();
            pw.commit();
            manifest.add_output("type1", dir / "type1.csv");
            manifest.add_output("power", dir / "power.csv");

            std::cout << "type-I error over " << pairs << " cross-room pairs at alpha " << g6(alpha)
                      << " (accused per 1000):\n";
            for (std::size_t v = 0; v < result.variants.size(); ++v)
                std::cout << "  " << result.variants[v].name() << "  " << g6(result.type1[v].per_thousand())
                          << "  (se " << g6(1000.0 * result.type1[v].se) << ")\n";
            std::cout << "power by copy level:\n  k";
            for (const auto& v : result.variants)
                std::cout << "  " << v.name();
            std::cout << '\n';
            for (std::size_t l = 0; l < cfg.copy_levels.size(); ++l) {
                std::cout << "  " << cfg.copy_levels[l];
                for (const auto& curve : result.curves)
                    std::cout << "  " << g6(curve.power[l].rate);
                std::cout << '\n';
            }
        });
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Answer-copying detection: fit response models, score pairs, flag rooms, simulate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", COPYDETECT_VERSION);

    FitCmd fit;
    DetectCmd detect;
    RoomsCmd rooms;
    SimulateCmd simulate;
    fit.attach(app.add_subcommand("fit", "fit a nominal response or Wesolowsky model"));
    detect.attach(app.add_subcommand("detect", "score every ordered pair within each room"));
    rooms.attach(app.add_subcommand("rooms", "per-room BH correction and massive-cheating flags"));
    simulate.attach(app.add_subcommand("simulate", "cross-room type-I error and copy-injection power"));

    CLI11_PARSE(app, argc, argv);

    const std::vector<std::string> args(argv, argv + argc);
    if (app.got_subcommand("fit"))
        return fit.run(args);
    if (app.got_subcommand("detect"))
        return detect.run(args);
    if (app.got_subcommand("rooms"))
        return rooms.run(args);
    return simulate.run(args);
}
