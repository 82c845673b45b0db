#include "copydetect/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace copydetect {

namespace {

constexpr std::size_t kMaxOptions = 26;

std::string_view trim_cr(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.remove_suffix(1);
    return line;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return in;
}

} // namespace

ExamDesign::ExamDesign(std::size_t options_per_question, std::vector<Answer> key)
    : options_(options_per_question), key_(std::move(key)) {
    if (options_ < 2 || options_ > kMaxOptions)
        throw std::invalid_argument("option count must be in [2, 26], got " + std::to_string(options_));
    if (key_.empty())
        throw std::invalid_argument("empty key");
    for (std::size_t i = 0; i < key_.size(); ++i) {
        if (key_[i] < 0 || static_cast<std::size_t>(key_[i]) >= options_)
            throw std::invalid_argument("key entry " + std::to_string(i + 1) + " out of range");
    }
}

std::uint64_t ExamDesign::fingerprint() const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    const std::string text = "n=" + std::to_string(options_) + ";key=" + encode_answers(key_);
    for (unsigned char ch : text)
        mix(ch);
    return h;
}

std::string ExamDesign::fingerprint_hex() const {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << fingerprint();
    return os.str();
}

std::size_t StudentRecord::num_answered() const {
    return static_cast<std::size_t>(
        std::count_if(responses.begin(), responses.end(), [](Answer a) { return a != kMissing; }));
}

ResponseMatrix::ResponseMatrix(ExamDesign design, std::vector<StudentRecord> records)
    : design_(std::move(design)), records_(std::move(records)) {
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < records_.size(); ++j) {
        const auto& rec = records_[j];
        if (rec.responses.size() != design_.num_questions())
            throw std::invalid_argument("record " + std::to_string(j + 1) + ": expected " +
                                        std::to_string(design_.num_questions()) + " answers");
        for (Answer a : rec.responses) {
            if (a != kMissing && (a < 0 || static_cast<std::size_t>(a) >= design_.num_options()))
                throw std::invalid_argument("record " + std::to_string(j + 1) + ": option out of range");
        }
        if (!seen.insert(rec.student_id).second)
            throw std::invalid_argument("duplicate student_id " + rec.student_id);
    }
}

std::vector<std::string> ResponseMatrix::room_ids() const {
    std::vector<std::string> rooms;
    std::unordered_set<std::string> seen;
    for (const auto& rec : records_) {
        if (seen.insert(rec.room_id).second)
            rooms.push_back(rec.room_id);
    }
    return rooms;
}

std::vector<std::size_t> ResponseMatrix::room_members(std::string_view room) const {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < records_.size(); ++j) {
        if (records_[j].room_id == room)
            members.push_back(j);
    }
    return members;
}

std::optional<std::size_t> ResponseMatrix::find(std::string_view student_id) const {
    for (std::size_t j = 0; j < records_.size(); ++j) {
        if (records_[j].student_id == student_id)
            return j;
    }
    return std::nullopt;
}

char option_letter(Answer option) {
    return option == kMissing ? '*' : static_cast<char>('A' + option);
}

std::string encode_answers(std::span<const Answer> answers) {
    std::string out;
    out.reserve(answers.size());
    for (Answer a : answers)
        out.push_back(option_letter(a));
    return out;
}

std::vector<Answer> decode_answers(std::string_view text, std::size_t num_options) {
    std::vector<Answer> out;
    out.reserve(text.size());
    for (char ch : text) {
        if (ch == '*') {
            out.push_back(kMissing);
            continue;
        }
        const int idx = ch - 'A';
        if (idx < 0 || idx >= 26)
            throw std::invalid_argument(std::string("invalid option character '") + ch + "'");
        if (static_cast<std::size_t>(idx) >= num_options)
            throw std::invalid_argument(std::string("option ") + ch + " out of range");
        out.push_back(static_cast<Answer>(idx));
    }
    return out;
}

ExamDesign read_key(std::istream& in, std::size_t num_options) {
    std::string line;
    while (std::getline(in, line)) {
        if (!trim_cr(line).empty())
            break;
    }
    const std::string_view text = trim_cr(line);
    if (text.empty())
        throw FormatError("empty key");
    std::vector<Answer> key;
    try {
        key = decode_answers(text, num_options);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("key: ") + e.what());
    }
    if (std::find(key.begin(), key.end(), kMissing) != key.end())
        throw FormatError("key: '*' is not a valid key entry");
    return ExamDesign(num_options, std::move(key));
}

ExamDesign parse_key(const std::filesystem::path& path, std::size_t num_options) {
    auto in = open_input(path);
    return read_key(in, num_options);
}

void write_key(std::ostream& out, const ExamDesign& design) {
    out << encode_answers(design.key()) << '\n';
}

ResponseMatrix read_responses(std::istream& in, const ExamDesign& design) {
    std::vector<StudentRecord> records;
    std::unordered_set<std::string> seen;
    std::string raw;
    std::size_t row = 0;
    bool first_line = true;
    while (std::getline(in, raw)) {
        const std::string_view line = trim_cr(raw);
        if (first_line) {
            first_line = false;
            if (line == "student_id,room_id,answers")
                continue;
        }
        if (line.empty())
            continue;
        ++row;
        const std::string where = "row " + std::to_string(row) + ": ";

        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos)
            throw FormatError(where + "expected 3 columns student_id,room_id,answers");

        StudentRecord rec;
        rec.student_id = std::string(line.substr(0, c1));
        rec.room_id = std::string(line.substr(c1 + 1, c2 - c1 - 1));
        const std::string_view answers = line.substr(c2 + 1);
        if (rec.student_id.empty())
            throw FormatError(where + "empty student_id");
        if (answers.size() != design.num_questions())
            throw FormatError(where + "expected " + std::to_string(design.num_questions()) + " answers");
        try {
            rec.responses = decode_answers(answers, design.num_options());
        } catch (const std::invalid_argument& e) {
            throw FormatError(where + e.what());
        }
        if (!seen.insert(rec.student_id).second)
            throw FormatError(where + "duplicate student_id " + rec.student_id);
        records.push_back(std::move(rec));
    }
    return ResponseMatrix(design, std::move(records));
}

ResponseMatrix parse_responses(const std::filesystem::path& path, const ExamDesign& design) {
    auto in = open_input(path);
    return read_responses(in, design);
}

void write_responses(std::ostream& out, const ResponseMatrix& matrix) {
    out << "student_id,room_id,answers\n";
    for (const auto& rec : matrix.records())
        out << rec.student_id << ',' << rec.room_id << ',' << encode_answers(rec.responses) << '\n';
}

} // namespace copydetect
