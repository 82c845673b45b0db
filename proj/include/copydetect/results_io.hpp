#pragma once

#include "copydetect/indices.hpp"
#include "copydetect/mtp.hpp"
#include "copydetect/simulate.hpp"

#include <iosfwd>
#include <span>
#include <vector>

// CSV exports. Numbers are written with round-trip precision.
//   pair results:  copier,source,room,variant,matches,statistic,p_value
//   room reports:  room_id,num_students,num_tests,suspected_share,massive_flag
//   type-I:        variant,type1_rate,se
//   power:         variant,k,power,se

namespace copydetect {

void write_pair_results_header(std::ostream& out);
void write_pair_results(std::ostream& out, std::span<const PairResult> results);
/// Reads a pair-results CSV back; n_scored is not part of the schema and is
/// left at 0.
std::vector<PairResult> read_pair_results(std::istream& in);

void write_room_reports(std::ostream& out, std::span<const mtp::RoomReport> reports);
void write_type1_csv(std::ostream& out, const sim::ProtocolResult& result);
void write_power_csv(std::ostream& out, const sim::ProtocolResult& result);

/// Round-trip formatting for doubles ("%.17g").
std::string format_double(double v);

} // namespace copydetect
