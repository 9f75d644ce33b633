#pragma once

#include "mmrm/covariance.hpp"
#include "mmrm/dataset.hpp"
#include "mmrm/statdist.hpp"
#include "mmrm/variance.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace mmrm {

enum class NoiseKind { Normal, MultivariateT, SkewNormal };

struct NoiseLaw {
    NoiseKind kind = NoiseKind::Normal;
    double t_df = 0.0;  // MultivariateT, must exceed 2
    double kappa = 0.0;  // SkewNormal loading, |kappa| < 1

    static NoiseLaw normal() { return {}; }
    static NoiseLaw multivariate_t(double d) { return {NoiseKind::MultivariateT, d, 0.0}; }
    static NoiseLaw skew_normal(double kappa) { return {NoiseKind::SkewNormal, 0.0, kappa}; }
};

/// Mean of y_j: intercept + slope * y_0 + treatment * g, plus the subject's
/// factor-level effect.
struct VisitMean {
    double intercept = 0.0;
    double baseline = 0.0;
    double treatment = 0.0;
};

/// Data-generating process for a two-arm trial. The baseline outcome y_0 is
/// the first covariate; an optional categorical factor adds one dummy column
/// per non-reference level and shifts y_0 and every outcome by its effect.
struct GenerationSpec {
    int p = 0;
    NoiseLaw noise;
    std::vector<VisitMean> means;  // one per visit
    double baseline_mean = 0.0;
    double baseline_sd = 1.0;
    CovarianceModel covariance;
    std::array<std::vector<double>, 2> retention;
    std::array<double, 2> allocation{0.5, 0.5};
    std::vector<double> factor_probs;    // empty: no factor
    std::vector<double> factor_effects;  // same length as factor_probs

    int covariate_count() const;
    void validate() const;
};

/// Shared-factor mixing matrix for the skew-normal law:
/// R_2 = (a R - b 1 1') / (1 - kappa^2). Throws NotPositiveDefiniteError.
Matrix skew_normal_r2(const Matrix& sigma, double kappa);

/// Draws one trial of total size n. Arms are fixed by the allocation, each
/// subject's dropout pattern is multinomial from the retention rates, and
/// dropout is independent of the outcomes.
MonotoneDataset generate_dataset(const GenerationSpec& gen, int n, Rng& rng);

struct AnalysisSettings {
    double alpha = 0.05;
    InfoMode info_mode = InfoMode::Expected;
};

struct ReplicationRecord {
    int index = 0;
    bool failed = false;
    double estimate = 0.0;
    double se = 0.0;
    double df = 0.0;
    bool rejected = false;
};

struct ReplicationSummary {
    int reps = 0;
    int failures = 0;
    int rejections = 0;
    double simulated_power = 0.0;  // rejections / successful replications
    double mc_se = 0.0;
    std::uint64_t seed = 0;
    int n = 0;
    double mean_estimate = 0.0;
    double sd_estimate = 0.0;
    double mean_se = 0.0;
    double mean_df = 0.0;
    double min_df = 0.0;
    double max_df = 0.0;
    std::vector<ReplicationRecord> records;  // filled when requested
};

struct ReplicationOptions {
    int workers = 1;
    bool keep_records = false;
    double max_failure_rate = 0.05;
};

/// Generate, fit by REML, and test tau_p = 0 with the KR standard error, reps
/// times. Replication i draws from Rng::for_stream(seed, i), so the summary
/// does not depend on the worker count. Throws SimulationFailureError when the
/// share of failed fits exceeds options.max_failure_rate.
ReplicationSummary run_replications(const GenerationSpec& gen, const AnalysisSettings& analysis, int n, int reps,
                                    std::uint64_t seed, const ReplicationOptions& options = {});

}  // namespace mmrm
