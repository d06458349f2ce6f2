#pragma once

// Subcommands of the qbsde executable. Each writes its artifact to `out`,
// diagnostics to `err`, and returns the process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace qbsde::cli {

enum Exit : int {
    kOk = 0,
    kConfigError = 1,
    kRuntimeError = 2,
    kNotCertified = 3,
    kNotConverged = 4,
};

struct CertifyFlags {
    int lambda_grid = 64;
    int delta_grid = 1024;
    std::optional<double> force_delta;
};

struct SolveFlags {
    std::size_t paths = 100000;
    int steps = 50;
    std::uint64_t seed = 7;
    std::string mode = "girsanov";
    std::optional<double> force_delta;
    /// Where the trace CSV goes; defaults to <config stem>.trace.csv beside the config.
    std::optional<std::filesystem::path> trace_path;
};

struct ValidateFlags {
    std::string suite = "all";  // oracles | invariants | all
    double tol_multiplier = 1.0;
    std::size_t paths = 100000;
    std::optional<std::filesystem::path> table;  // audit a tabulated generator instead
};

struct ContractionFlags {
    int trials = 5;
    std::uint64_t seed = 11;
    std::size_t paths = 20000;
    int steps = 20;
    std::string mode = "girsanov";
};

int cmd_certify(const std::filesystem::path& config, const CertifyFlags& flags, std::ostream& out,
                std::ostream& err);
int cmd_solve(const std::filesystem::path& config, const SolveFlags& flags, std::ostream& out,
              std::ostream& err);
int cmd_validate(const ValidateFlags& flags, std::ostream& out, std::ostream& err);
int cmd_contraction(const std::filesystem::path& config, const ContractionFlags& flags,
                    std::ostream& out, std::ostream& err);

std::filesystem::path default_trace_path(const std::filesystem::path& config);

}  // namespace qbsde::cli
