#pragma once

#include "mmrm/design.hpp"
#include "mmrm/simulate.hpp"

#include <string>
#include <vector>

namespace mmrm {

// Built-in planning scenarios: a four-visit depression-scale trial with the
// baseline score as covariate ("one-covariate"), optionally extended by a
// three-level prognostic factor ("factor", two extra dummy covariates).

enum class Scenario { OneCovariate, Factor };
enum class CovarianceCase { Unstructured, CompoundSymmetry, Ar1, Toeplitz };

/// "unstructured", "cs", "ar1", "toeplitz".
std::string case_name(CovarianceCase c);
/// Accepts the names above plus "ar(1)"; throws ParseError otherwise.
CovarianceCase parse_case(const std::string& name);

CovarianceModel scenario_covariance(CovarianceCase c);
DesignSpec scenario_design(Scenario s, CovarianceCase c, double tau);
GenerationSpec scenario_generator(Scenario s, CovarianceCase c, double tau, NoiseLaw noise = NoiseLaw::normal());

struct TableRow {
    CovarianceCase covariance;
    double tau;
};

/// The 12 (covariance, tau) cells of a sample-size table, in print order.
std::vector<TableRow> table_rows();

/// Table number used by the CLI: 2 is OneCovariate, 3 is Factor.
Scenario scenario_for_table(int table);

}  // namespace mmrm
