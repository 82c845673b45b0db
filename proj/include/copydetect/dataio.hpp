#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace copydetect {

/// Zero-based option index; `kMissing` marks an unanswered question.
using Answer = std::int16_t;
inline constexpr Answer kMissing = -1;

/// Thrown for malformed input files and model containers. The message
/// always names the offending row, field or file.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Number of questions, the uniform option count and the answer key.
/// Key entries are zero-based here; files use letters A.., so key letter
/// `A` is option 0.
class ExamDesign {
  public:
    ExamDesign(std::size_t options_per_question, std::vector<Answer> key);

    std::size_t num_questions() const { return key_.size(); }
    std::size_t num_options() const { return options_; }
    std::span<const Answer> key() const { return key_; }
    Answer key(std::size_t item) const { return key_[item]; }

    /// FNV-1a hash over the option count and key; stored in model files so a
    /// model cannot be applied to a different exam.
    std::uint64_t fingerprint() const;
    std::string fingerprint_hex() const;

    bool operator==(const ExamDesign&) const = default;

  private:
    std::size_t options_;
    std::vector<Answer> key_;
};

struct StudentRecord {
    std::string student_id;
    std::string room_id;
    std::vector<Answer> responses;

    std::size_t num_answered() const;
    bool operator==(const StudentRecord&) const = default;
};

class ResponseMatrix {
  public:
    ResponseMatrix(ExamDesign design, std::vector<StudentRecord> records);

    const ExamDesign& design() const { return design_; }
    std::span<const StudentRecord> records() const { return records_; }
    const StudentRecord& record(std::size_t j) const { return records_[j]; }
    std::size_t size() const { return records_.size(); }

    /// Distinct room ids in order of first appearance.
    std::vector<std::string> room_ids() const;
    /// Record indices belonging to `room`, in row order.
    std::vector<std::size_t> room_members(std::string_view room) const;
    std::optional<std::size_t> find(std::string_view student_id) const;

    bool operator==(const ResponseMatrix&) const = default;

  private:
    ExamDesign design_;
    std::vector<StudentRecord> records_;
};

char option_letter(Answer option);
/// Encodes answers as letters with `*` for missing.
std::string encode_answers(std::span<const Answer> answers);
/// Decodes a letter string; throws std::invalid_argument naming the first
/// offending character.
std::vector<Answer> decode_answers(std::string_view text, std::size_t num_options);

ExamDesign read_key(std::istream& in, std::size_t num_options);
ExamDesign parse_key(const std::filesystem::path& path, std::size_t num_options);
void write_key(std::ostream& out, const ExamDesign& design);

/// CSV `student_id,room_id,answers`; an optional header line with exactly
/// those column names is skipped. Row numbers in errors count data rows
/// from 1.
ResponseMatrix read_responses(std::istream& in, const ExamDesign& design);
ResponseMatrix parse_responses(const std::filesystem::path& path, const ExamDesign& design);
void write_responses(std::ostream& out, const ResponseMatrix& matrix);

} // namespace copydetect
