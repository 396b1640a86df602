#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "apd/solver.hpp"

namespace apd {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Per-iteration curve: step,return,cost,lr,lambda. With several constraints
/// the cost and lambda columns become cost_1..cost_m and lambda_1..lambda_m.
std::string record_csv(const RunRecord& rec);

/// Inverse of record_csv. Fills step, reward, costs, lr and lambda of each
/// row; theta, g and the final iterate are left empty. Throws
/// std::runtime_error naming the offending line.
RunRecord parse_record_csv(std::string_view text);

/// Iterate trace: step,lambda...,theta... for k = 0..K, where row K holds
/// the final multiplier and parameters.
std::string trace_csv(const RunRecord& rec);

/// Merges a trace into a record parsed from record_csv: sets theta of every
/// row, the final iterate and g = costs - d.
void attach_trace(RunRecord& rec, std::string_view trace_text, const Vector& thresholds);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace apd
