#include "mmrm/io.hpp"

#include "mmrm/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mmrm {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    out.push_back(cell);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, int line, const std::string& column) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("line " + std::to_string(line) + ": column '" + column + "' has non-numeric value '" +
                         text + "'");
    }
    return v;
}

bool is_outcome_name(const std::string& name, int index) { return name == "y" + std::to_string(index); }

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ParseError(std::string("missing key '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("key '") + key + "': " + e.what());
    }
}

std::array<std::vector<double>, 2> parse_retention(const json& j) {
    const auto rows = required<std::vector<std::vector<double>>>(j, "retention");
    if (rows.size() != 2) {
        throw ParseError("retention must have one row per arm (2 rows)");
    }
    return {rows[0], rows[1]};
}

std::array<double, 2> parse_allocation(const json& j) {
    if (!j.contains("allocation")) {
        return {0.5, 0.5};
    }
    const auto a = required<std::vector<double>>(j, "allocation");
    if (a.size() != 2) {
        throw ParseError("allocation must have two entries");
    }
    return {a[0], a[1]};
}

Matrix parse_matrix(const json& j) {
    std::vector<std::vector<double>> rows;
    try {
        rows = j.get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("matrix: ") + e.what());
    }
    const auto r = static_cast<Eigen::Index>(rows.size());
    Matrix m(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != r) {
            throw ParseError("covariance matrix must be square");
        }
        for (Eigen::Index k = 0; k < r; ++k) {
            m(i, k) = rows[i][k];
        }
    }
    return m;
}

}  // namespace

CsvData read_csv(std::istream& in) {
    CsvData out;
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) {
        throw ParseError("empty CSV input");
    }
    ++line_no;
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    if (header.size() < 3 || header[0] != "subject" || header[1] != "group") {
        throw ParseError("CSV header must start with 'subject,group'");
    }
    // Trailing run y1..yp: the last column names p.
    const std::string& last = header.back();
    int p = 0;
    if (last.size() > 1 && last[0] == 'y') {
        const auto [ptr, ec] = std::from_chars(last.data() + 1, last.data() + last.size(), p);
        if (ec != std::errc() || ptr != last.data() + last.size()) {
            p = 0;
        }
    }
    if (p < 1 || p > static_cast<int>(header.size()) - 2) {
        throw ParseError("CSV header must end with outcome columns y1..yp");
    }
    const int first_outcome = static_cast<int>(header.size()) - p;
    for (int k = 0; k < p; ++k) {
        if (!is_outcome_name(header[first_outcome + k], k + 1)) {
            throw ParseError("outcome columns must be named y1..yp in order");
        }
    }
    out.p = p;
    out.covariate_names.assign(header.begin() + 2, header.begin() + first_outcome);

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line) == "\r") {
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(cells.size()));
        }
        SubjectRecord s;
        s.id = trim(cells[0]);
        if (s.id.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty subject id");
        }
        const std::string g = trim(cells[1]);
        if (g == "0") {
            s.group = 0;
        } else if (g == "1") {
            s.group = 1;
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": group must be 0 or 1, found '" + g + "'");
        }
        for (int k = 2; k < first_outcome; ++k) {
            const std::string c = trim(cells[k]);
            if (c.empty()) {
                throw ParseError("line " + std::to_string(line_no) + ": covariate '" + header[k] + "' is missing");
            }
            s.covariates.push_back(parse_number(c, line_no, header[k]));
        }
        for (int k = first_outcome; k < static_cast<int>(cells.size()); ++k) {
            const std::string c = trim(cells[k]);
            if (c.empty()) {
                s.outcomes.emplace_back(std::nullopt);
            } else {
                s.outcomes.emplace_back(parse_number(c, line_no, header[k]));
            }
        }
        out.records.push_back(std::move(s));
    }
    if (out.records.empty()) {
        throw ParseError("CSV has no data rows");
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ParseError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CsvData read_csv_file(const std::string& path) {
    std::istringstream in(read_text_file(path));
    return read_csv(in);
}

json read_json_file(const std::string& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

CovarianceModel parse_covariance(const json& j) {
    if (!j.is_object()) {
        throw ParseError("covariance must be an object {type, params}");
    }
    const auto type = required<std::string>(j, "type");
    const json params = j.contains("params") ? j.at("params") : json::object();
    try {
        if (type == "unstructured") {
            return CovarianceModel::unstructured(parse_matrix(params.is_object() ? params.at("sigma") : params));
        }
        if (type == "cs" || type == "ar1") {
            const auto h = required<double>(params, "h");
            const auto rho = required<double>(params, "rho");
            return type == "cs" ? CovarianceModel::compound_symmetry(h, rho) : CovarianceModel::ar1(h, rho);
        }
        if (type == "toeplitz") {
            const auto row = (params.is_object() ? params.at("first_row") : params).get<std::vector<double>>();
            return CovarianceModel::toeplitz(Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size())));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("covariance params: ") + e.what());
    }
    throw ParseError("unknown covariance type '" + type + "'");
}

DesignSpec parse_design(const json& j) {
    DesignSpec spec{
        .p = required<int>(j, "p"),
        .allocation = parse_allocation(j),
        .retention = parse_retention(j),
        .covariance = parse_covariance(j.contains("covariance") ? j.at("covariance") : json()),
        .tau = required<double>(j, "tau"),
        .alpha = j.contains("alpha") ? required<double>(j, "alpha") : 0.05,
        .target_power = j.contains("targetPower") ? required<double>(j, "targetPower") : 0.9,
        .qstar = j.contains("qstar") ? required<int>(j, "qstar") : 0,
        .strata = std::nullopt,
        .imbalance = std::nullopt,
    };
    if (j.contains("strata") && !j.at("strata").is_null()) {
        spec.strata = required<int>(j, "strata");
    }
    if (j.contains("imbalanceD") && !j.at("imbalanceD").is_null()) {
        spec.imbalance = required<double>(j, "imbalanceD");
    }
    spec.validate();
    return spec;
}

GenerationSpec parse_generator(const json& j) {
    const int p = required<int>(j, "p");
    NoiseLaw noise;
    if (j.contains("distribution")) {
        const json& d = j.at("distribution");
        const auto type = required<std::string>(d, "type");
        if (type == "normal") {
            noise = NoiseLaw::normal();
        } else if (type == "t" || type == "multivariate_t") {
            noise = NoiseLaw::multivariate_t(required<double>(d, "df"));
        } else if (type == "skew_normal" || type == "skew-normal") {
            noise = NoiseLaw::skew_normal(required<double>(d, "kappa"));
        } else {
            throw ParseError("unknown distribution type '" + type + "'");
        }
    }
    std::vector<VisitMean> means;
    for (const auto& row : required<std::vector<std::vector<double>>>(j, "means")) {
        if (row.size() != 3) {
            throw ParseError("each mean row is [intercept, baseline, treatment]");
        }
        means.push_back({row[0], row[1], row[2]});
    }
    if (!j.contains("baseline")) {
        throw ParseError("missing key 'baseline'");
    }
    GenerationSpec g{
        .p = p,
        .noise = noise,
        .means = std::move(means),
        .baseline_mean = required<double>(j.at("baseline"), "mean"),
        .baseline_sd = required<double>(j.at("baseline"), "sd"),
        .covariance = parse_covariance(j.contains("covariance") ? j.at("covariance") : json()),
        .retention = parse_retention(j),
        .allocation = parse_allocation(j),
        .factor_probs = {},
        .factor_effects = {},
    };
    if (j.contains("factor")) {
        g.factor_probs = required<std::vector<double>>(j.at("factor"), "probs");
        g.factor_effects = required<std::vector<double>>(j.at("factor"), "effects");
    }
    g.validate();
    return g;
}

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            row.push_back(m(i, k));
        }
        rows.push_back(row);
    }
    return rows;
}

json to_json(const PowerResult& r) {
    return json{{"n", r.n},
                {"lambdaSqrtN", r.lambda_sqrt_n},
                {"df", r.df},
                {"powerExact", r.power_exact},
                {"powerApprox", r.power_approx},
                {"varpiTau", r.varpi_tau},
                {"varpiX", r.varpi_x},
                {"varianceN", r.variance_n}};
}

json to_json(const SampleSizePlan& plan) {
    return json{{"nl", plan.nl},
                {"nu", plan.nu},
                {"nuStar", plan.nu_star},
                {"dfAtNl", plan.df_at_nl},
                {"twoStepN", plan.two_step_n},
                {"twoStepPower", plan.two_step_power},
                {"final", plan.final_n},
                {"nominalPower", plan.nominal_power},
                {"perArm", {plan.per_arm[0], plan.per_arm[1]}},
                {"usedBisection", plan.used_bisection}};
}

json to_json(const ReplicationSummary& s) {
    json j{{"reps", s.reps},
           {"failures", s.failures},
           {"rejections", s.rejections},
           {"simulatedPower", s.simulated_power},
           {"mcSE", s.mc_se},
           {"seed", s.seed},
           {"n", s.n},
           {"estimate", {{"mean", s.mean_estimate}, {"sd", s.sd_estimate}, {"meanSE", s.mean_se}}},
           {"df", {{"mean", s.mean_df}, {"min", s.min_df}, {"max", s.max_df}}}};
    return j;
}

}  // namespace mmrm
