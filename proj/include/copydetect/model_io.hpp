#pragma once

#include "copydetect/dataio.hpp"
#include "copydetect/nominal.hpp"
#include "copydetect/wesolowsky.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <variant>

// Model container: a JSON document
//   { "format": "copydetect-model", "version": 1, "kind": "nominal"|"wesolowsky",
//     "exam": { "num_questions", "num_options", "key", "fingerprint" }, ... }
// Doubles are written with round-trip precision, so load(save(m)) == m.

namespace copydetect {

inline constexpr const char* kModelFormat = "copydetect-model";
inline constexpr int kModelFormatVersion = 1;

struct NominalFitSummary {
    bool converged = false;
    std::size_t cycles = 0;
    double final_loglik = 0.0;
    bool operator==(const NominalFitSummary&) const = default;
};

struct LoadedModel {
    ExamDesign design;
    std::variant<NominalModel, WesolowskyModel> model;
    std::optional<NominalFitSummary> fit;

    bool is_nominal() const { return std::holds_alternative<NominalModel>(model); }
    const NominalModel& nominal() const { return std::get<NominalModel>(model); }
    const WesolowskyModel& wesolowsky() const { return std::get<WesolowskyModel>(model); }
};

void write_model(std::ostream& out, const ExamDesign& design, const NominalModel& model,
                 const std::optional<NominalFitSummary>& fit = std::nullopt);
void write_model(std::ostream& out, const WesolowskyModel& model);
void save_model(const std::filesystem::path& path, const ExamDesign& design, const NominalModel& model,
                const std::optional<NominalFitSummary>& fit = std::nullopt);
void save_model(const std::filesystem::path& path, const WesolowskyModel& model);

/// Throws FormatError on a wrong format tag, a version mismatch (naming the
/// expected and found versions), a truncated or malformed document, or
/// inconsistent sizes. Nothing is returned on error.
LoadedModel read_model(std::istream& in);
LoadedModel load_model(const std::filesystem::path& path);

} // namespace copydetect
