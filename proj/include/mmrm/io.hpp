#pragma once

#include "mmrm/dataset.hpp"
#include "mmrm/design.hpp"
#include "mmrm/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace mmrm {

struct CsvData {
    std::vector<std::string> covariate_names;
    int p = 0;
    std::vector<SubjectRecord> records;
};

/// Reads `subject,group,<covariates...>,y1..yp`. The outcome columns are the
/// trailing run named y1, y2, ...; an empty cell is a missing value.
/// Throws ParseError with the offending line.
CsvData read_csv(std::istream& in);
CsvData read_csv_file(const std::string& path);

/// Design spec JSON: p, allocation, retention (2 x p), covariance {type, params},
/// tau, alpha, targetPower, qstar, optional strata and imbalanceD.
DesignSpec parse_design(const nlohmann::json& j);
/// Generator JSON: p, distribution {type, df, kappa}, means (p rows of
/// [intercept, baseline, treatment]), baseline {mean, sd}, covariance,
/// retention, allocation, optional factor {probs, effects}.
GenerationSpec parse_generator(const nlohmann::json& j);
CovarianceModel parse_covariance(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

nlohmann::json to_json(const PowerResult& r);
nlohmann::json to_json(const SampleSizePlan& plan);
nlohmann::json to_json(const ReplicationSummary& s);
nlohmann::json to_json(const Matrix& m);

}  // namespace mmrm
