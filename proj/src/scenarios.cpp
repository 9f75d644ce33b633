#include "mmrm/scenarios.hpp"

#include "mmrm/errors.hpp"

#include <algorithm>
#include <cctype>

namespace mmrm {

namespace {

constexpr int kVisits = 4;

const std::array<std::vector<double>, 2>& retention() {
    static const std::array<std::vector<double>, 2> r{std::vector<double>{1.0, 0.92, 0.86, 0.74},
                                                      std::vector<double>{1.0, 0.93, 0.87, 0.76}};
    return r;
}

}  // namespace

std::string case_name(CovarianceCase c) {
    switch (c) {
        case CovarianceCase::Unstructured:
            return "unstructured";
        case CovarianceCase::CompoundSymmetry:
            return "cs";
        case CovarianceCase::Ar1:
            return "ar1";
        case CovarianceCase::Toeplitz:
            return "toeplitz";
    }
    return "unstructured";
}

CovarianceCase parse_case(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "unstructured" || s == "un") return CovarianceCase::Unstructured;
    if (s == "cs") return CovarianceCase::CompoundSymmetry;
    if (s == "ar1" || s == "ar(1)") return CovarianceCase::Ar1;
    if (s == "toeplitz" || s == "toep") return CovarianceCase::Toeplitz;
    throw ParseError("unknown covariance structure '" + name + "'");
}

CovarianceModel scenario_covariance(CovarianceCase c) {
    switch (c) {
        case CovarianceCase::Unstructured: {
            Matrix s(kVisits, kVisits);
            s << 19.68, 16.45, 15.39, 16.36,  //
                16.45, 34.00, 25.34, 26.13,   //
                15.39, 25.34, 38.44, 33.91,   //
                16.36, 26.13, 33.91, 45.28;
            return CovarianceModel::unstructured(s);
        }
        case CovarianceCase::CompoundSymmetry:
            return CovarianceModel::compound_symmetry(45.0, 1.0 / 3.0);
        case CovarianceCase::Ar1:
            return CovarianceModel::ar1(45.0, 0.8);
        case CovarianceCase::Toeplitz: {
            Vector row(kVisits);
            row << 40.0, 34.0, 28.0, 22.0;
            return CovarianceModel::toeplitz(row);
        }
    }
    throw InvalidModelError("unknown covariance case");
}

DesignSpec scenario_design(Scenario s, CovarianceCase c, double tau) {
    return DesignSpec{
        .p = kVisits,
        .allocation = {0.5, 0.5},
        .retention = retention(),
        .covariance = scenario_covariance(c),
        .tau = tau,
        .alpha = 0.05,
        .target_power = 0.9,
        .qstar = s == Scenario::OneCovariate ? 1 : 3,
        .strata = std::nullopt,
        .imbalance = std::nullopt,
    };
}

GenerationSpec scenario_generator(Scenario s, CovarianceCase c, double tau, NoiseLaw noise) {
    GenerationSpec g{
        .p = kVisits,
        .noise = noise,
        .means = {{3.3, 0.72, 0.1}, {2.7, 0.69, -1.5}, {2.9, 0.61, -2.3}, {1.0, 0.67, tau}},
        .baseline_mean = 17.9,
        .baseline_sd = 5.5,
        .covariance = scenario_covariance(c),
        .retention = retention(),
        .allocation = {0.5, 0.5},
        .factor_probs = {},
        .factor_effects = {},
    };
    if (s == Scenario::Factor) {
        g.factor_probs = {0.3, 0.4, 0.3};
        g.factor_effects = {0.0, -0.5, 0.5};
    }
    return g;
}

std::vector<TableRow> table_rows() {
    std::vector<TableRow> rows;
    for (auto c : {CovarianceCase::Unstructured, CovarianceCase::CompoundSymmetry, CovarianceCase::Ar1,
                   CovarianceCase::Toeplitz}) {
        for (double tau : {-12.0, -8.0, -4.0}) {
            rows.push_back({c, tau});
        }
    }
    return rows;
}

Scenario scenario_for_table(int table) {
    if (table == 2) return Scenario::OneCovariate;
    if (table == 3) return Scenario::Factor;
    throw ParseError("table must be 2 or 3");
}

}  // namespace mmrm
