#include "copydetect/model_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

namespace copydetect {

using nlohmann::json;

namespace {

json exam_json(const ExamDesign& design) {
    return {{"num_questions", design.num_questions()},
            {"num_options", design.num_options()},
            {"key", encode_answers(design.key())},
            {"fingerprint", design.fingerprint_hex()}};
}

json rows(std::span<const double> flat, std::size_t width) {
    json out = json::array();
    for (std::size_t i = 0; i < flat.size(); i += width)
        out.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i),
                                          flat.begin() + static_cast<std::ptrdiff_t>(i + width)));
    return out;
}

std::vector<double> flatten(const json& j, std::size_t n_rows, std::size_t width, const char* field) {
    if (!j.is_array() || j.size() != n_rows)
        throw FormatError(std::string("model: field '") + field + "' has the wrong number of rows");
    std::vector<double> flat;
    flat.reserve(n_rows * width);
    for (const auto& row : j) {
        auto values = row.get<std::vector<double>>();
        if (values.size() != width)
            throw FormatError(std::string("model: field '") + field + "' has a row of the wrong width");
        flat.insert(flat.end(), values.begin(), values.end());
    }
    return flat;
}

ItemStatus parse_item_status(const std::string& s) {
    for (ItemStatus st : {ItemStatus::ok, ItemStatus::unused_option_pinned, ItemStatus::degenerate_uniform}) {
        if (s == to_string(st))
            return st;
    }
    throw FormatError("model: unknown item status '" + s + "'");
}

AbilityStatus parse_ability_status(const std::string& s) {
    for (AbilityStatus st :
         {AbilityStatus::ok, AbilityStatus::clamped_low, AbilityStatus::clamped_high, AbilityStatus::no_answers}) {
        if (s == to_string(st))
            return st;
    }
    throw FormatError("model: unknown ability status '" + s + "'");
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw FormatError("cannot write " + path.string());
    return out;
}

ExamDesign read_exam(const json& doc) {
    const auto& exam = doc.at("exam");
    const auto n = exam.at("num_options").get<std::size_t>();
    std::vector<Answer> key;
    try {
        key = decode_answers(exam.at("key").get<std::string>(), n);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model: exam key: ") + e.what());
    }
    ExamDesign design(n, std::move(key));
    if (design.num_questions() != exam.at("num_questions").get<std::size_t>())
        throw FormatError("model: exam num_questions does not match the key");
    if (design.fingerprint_hex() != exam.at("fingerprint").get<std::string>())
        throw FormatError("model: exam fingerprint does not match the stored key");
    return design;
}

} // namespace

void write_model(std::ostream& out, const ExamDesign& design, const NominalModel& model,
                 const std::optional<NominalFitSummary>& fit) {
    json status = json::array();
    for (std::size_t i = 0; i < model.num_items(); ++i)
        status.push_back(to_string(model.status(i)));
    json doc = {{"format", kModelFormat},
                {"version", kModelFormatVersion},
                {"kind", "nominal"},
                {"exam", exam_json(design)},
                {"nominal",
                 {{"quadrature", {{"nodes", model.quadrature().nodes}, {"weights", model.quadrature().weights}}},
                  {"intercepts", rows(model.all_intercepts(), model.num_options())},
                  {"slopes", rows(model.all_slopes(), model.num_options())},
                  {"item_status", status}}}};
    if (fit)
        doc["fit"] = {{"converged", fit->converged}, {"cycles", fit->cycles}, {"final_loglik", fit->final_loglik}};
    out << doc.dump(1) << '\n';
}

void write_model(std::ostream& out, const WesolowskyModel& model) {
    json students = json::array();
    for (std::size_t j = 0; j < model.students.size(); ++j) {
        const auto& st = model.students[j];
        json a = std::isfinite(st.a) ? json(st.a) : json(nullptr);
        students.push_back({{"id", model.student_ids[j]},
                            {"a", a},
                            {"c", st.c},
                            {"residual", st.residual},
                            {"answered", st.answered},
                            {"status", to_string(st.status)}});
    }
    const json doc = {{"format", kModelFormat},
                      {"version", kModelFormatVersion},
                      {"kind", "wesolowsky"},
                      {"exam", exam_json(model.design())},
                      {"wesolowsky",
                       {{"proportion_correct", model.all_proportions()},
                        {"wrong_shares", rows(model.all_wrong_shares(), model.num_options())},
                        {"students", students}}}};
    out << doc.dump(1) << '\n';
}

void save_model(const std::filesystem::path& path, const ExamDesign& design, const NominalModel& model,
                const std::optional<NominalFitSummary>& fit) {
    auto out = open_output(path);
    write_model(out, design, model, fit);
    if (!out)
        throw FormatError("failed writing " + path.string());
}

void save_model(const std::filesystem::path& path, const WesolowskyModel& model) {
    auto out = open_output(path);
    write_model(out, model);
    if (!out)
        throw FormatError("failed writing " + path.string());
}

LoadedModel read_model(std::istream& in) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model: truncated or malformed file (") + e.what() + ")");
    }
    try {
        if (!doc.is_object() || doc.value("format", std::string{}) != kModelFormat)
            throw FormatError(std::string("model: not a copydetect model file (missing '") + kModelFormat +
                              "' format tag)");
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw FormatError("model: format version mismatch: expected " + std::to_string(kModelFormatVersion) +
                              ", found " + std::to_string(version));
        ExamDesign design = read_exam(doc);
        const std::size_t items = design.num_questions(), options = design.num_options();
        const auto kind = doc.at("kind").get<std::string>();

        if (kind == "nominal") {
            const auto& body = doc.at("nominal");
            Quadrature quad{body.at("quadrature").at("nodes").get<std::vector<double>>(),
                            body.at("quadrature").at("weights").get<std::vector<double>>()};
            NominalModel model(items, options, std::move(quad));
            const auto xi = flatten(body.at("intercepts"), items, options, "intercepts");
            const auto la = flatten(body.at("slopes"), items, options, "slopes");
            const auto status = body.at("item_status").get<std::vector<std::string>>();
            if (status.size() != items)
                throw FormatError("model: item_status has the wrong length");
            for (std::size_t i = 0; i < items; ++i) {
                std::copy_n(xi.begin() + static_cast<std::ptrdiff_t>(i * options), options,
                            model.intercepts(i).begin());
                std::copy_n(la.begin() + static_cast<std::ptrdiff_t>(i * options), options, model.slopes(i).begin());
                model.set_status(i, parse_item_status(status[i]));
            }
            std::optional<NominalFitSummary> fit;
            if (doc.contains("fit")) {
                const auto& f = doc.at("fit");
                fit = NominalFitSummary{f.at("converged").get<bool>(), f.at("cycles").get<std::size_t>(),
                                        f.at("final_loglik").get<double>()};
            }
            return LoadedModel{design, std::move(model), fit};
        }
        if (kind == "wesolowsky") {
            const auto& body = doc.at("wesolowsky");
            auto r = body.at("proportion_correct").get<std::vector<double>>();
            if (r.size() != items)
                throw FormatError("model: proportion_correct has the wrong length");
            auto q = flatten(body.at("wrong_shares"), items, options, "wrong_shares");
            WesolowskyModel model(design, std::move(r), std::move(q));
            for (const auto& s : body.at("students")) {
                WesolowskyStudent st;
                st.a = s.at("a").is_null() ? std::nan("") : s.at("a").get<double>();
                st.c = s.at("c").get<double>();
                st.residual = s.at("residual").get<double>();
                st.answered = s.at("answered").get<std::size_t>();
                st.status = parse_ability_status(s.at("status").get<std::string>());
                model.student_ids.push_back(s.at("id").get<std::string>());
                model.students.push_back(st);
            }
            return LoadedModel{design, std::move(model), std::nullopt};
        }
        throw FormatError("model: unknown kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: missing or mistyped field (") + e.what() + ")");
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return read_model(in);
}

} // namespace copydetect
