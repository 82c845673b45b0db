#include "copydetect/results_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace copydetect {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_pair_results_header(std::ostream& out) {
    out << "copier,source,room,variant,matches,statistic,p_value\n";
}

void write_pair_results(std::ostream& out, std::span<const PairResult> results) {
    for (const auto& r : results) {
        out << r.copier_id << ',' << r.source_id << ',' << r.room_id << ',' << r.variant.name() << ',' << r.matches
            << ',' << format_double(r.statistic) << ',' << format_double(r.p_value) << '\n';
    }
}

std::vector<PairResult> read_pair_results(std::istream& in) {
    std::vector<PairResult> out;
    std::string line;
    std::size_t row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (first) {
            first = false;
            if (line == "copier,source,room,variant,matches,statistic,p_value")
                continue;
        }
        if (line.empty())
            continue;
        ++row;
        const auto cells = split_csv(line);
        if (cells.size() != 7)
            throw FormatError("results row " + std::to_string(row) + ": expected 7 columns");
        PairResult r;
        r.copier_id = cells[0];
        r.source_id = cells[1];
        r.room_id = cells[2];
        try {
            r.variant = IndexVariant::parse(cells[3]);
            r.matches = std::stoul(cells[4]);
            r.statistic = std::stod(cells[5]);
            r.p_value = std::stod(cells[6]);
        } catch (const std::exception& e) {
            throw FormatError("results row " + std::to_string(row) + ": " + e.what());
        }
        if (!(r.p_value >= 0.0 && r.p_value <= 1.0))
            throw FormatError("results row " + std::to_string(row) + ": p_value outside [0,1]");
        out.push_back(std::move(r));
    }
    return out;
}

void write_room_reports(std::ostream& out, std::span<const mtp::RoomReport> reports) {
    out << "room_id,num_students,num_tests,suspected_share,massive_flag\n";
    for (const auto& r : reports) {
        out << r.room_id << ',' << r.num_students << ',' << r.num_tests << ',' << format_double(r.suspected_share)
            << ',' << (r.massive_flag ? 1 : 0) << '\n';
    }
}

void write_type1_csv(std::ostream& out, const sim::ProtocolResult& result) {
    out << "variant,type1_rate,se\n";
    for (std::size_t v = 0; v < result.variants.size(); ++v) {
        out << result.variants[v].name() << ',' << format_double(result.type1[v].rate) << ','
            << format_double(result.type1[v].se) << '\n';
    }
}

void write_power_csv(std::ostream& out, const sim::ProtocolResult& result) {
    out << "variant,k,power,se\n";
    for (const auto& curve : result.curves) {
        for (std::size_t l = 0; l < curve.levels.size(); ++l) {
            out << curve.variant.name() << ',' << curve.levels[l] << ',' << format_double(curve.power[l].rate) << ','
                << format_double(curve.power[l].se) << '\n';
        }
    }
}

} // namespace copydetect
