#pragma once

// JSON documents for problems, ledgers, fitted processes and solve reports,
// and the CSV form of convergence traces. Key order is fixed so that output
// is byte-for-byte reproducible.

#include <filesystem>
#include <iosfwd>
#include <json.hpp>

#include "qbsde/certificate.hpp"
#include "qbsde/pasting.hpp"
#include "qbsde/problem.hpp"

namespace qbsde {

using Json = nlohmann::ordered_json;

/// Throws ConfigError naming the missing or malformed field.
ProblemSpec problem_from_json(const Json& doc);
ProblemSpec load_problem(const std::filesystem::path& file);
Json to_json(const ProblemSpec& spec);

Json to_json(const ConstantLedger& ledger);
Json to_json(const ProcessApprox& approx);
Json to_json(const ConvergenceTrace& trace);
Json to_json(const SolveReport& report);
Json to_json(const ValidationReport& report);

/// Header "iter,dist_y,dist_z,ratio,clip_events"; an undefined ratio is an
/// empty cell.
void write_trace_csv(std::ostream& os, const ConvergenceTrace& trace, bool header = true);
/// All windows of a report, terminal window first; iter restarts at 1 in each.
void write_trace_csv(std::ostream& os, const SolveReport& report);

/// Generator table for validate-only audits:
/// {"d", "k", "C2", "C3", "C4", "rows": [{"y": [...], "z": [...], "f": [...]}]}.
struct GeneratorTable {
    int d = 1;
    int k = 1;
    double C2 = 0.0, C3 = 0.0, C4 = 0.0;
    std::vector<GeneratorSample> rows;
};
GeneratorTable load_generator_table(const std::filesystem::path& file);

}  // namespace qbsde
