#pragma once

#include "mmrm/dataset.hpp"
#include "mmrm/io.hpp"
#include "mmrm/variance.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmrm {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitParse = 2,
    kExitNonMonotone = 3,
    kExitFit = 4,
};

struct VisitEstimate {
    int visit = 0;
    Vector alpha;
    double tau = 0.0;
    double se_asymptotic = 0.0;
    double se_kr = 0.0;
    double se_delta = 0.0;
};

struct AnalysisReport {
    std::vector<std::string> covariate_names;
    std::vector<VisitEstimate> visits;
    Matrix sigma_hat;
    WaldTest test;  // tau at the last visit
    InfoMode info_mode = InfoMode::Expected;
    std::string strategy;  // "none", "exclude", "truncate" or "impute"
    std::string digest;    // FNV-1a of the input bytes
    int n = 0;
    std::vector<std::array<int, 2>> pattern_counts;  // patterns 0..p, (placebo, active)
};

/// CSV records -> monotone data -> REML fit -> variances -> Wald test.
/// Without a strategy the records must already be monotone.
AnalysisReport analyze_records(const CsvData& csv, std::optional<MonotoneStrategy> strategy, InfoMode mode,
                               const std::string& digest);

nlohmann::json to_json(const AnalysisReport& r);
std::string to_text(const AnalysisReport& r);

/// Runs one command line (args excludes the program name) and returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmrm
