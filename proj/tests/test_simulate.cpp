#include "mmrm/covariance.hpp"
#include "mmrm/errors.hpp"
#include "mmrm/scenarios.hpp"
#include "mmrm/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace mmrm;

namespace {

Matrix target_sigma() { return materialize_covariance(scenario_covariance(CovarianceCase::Unstructured), 4); }

/// Zero means, no dropout: outcomes are pure noise.
GenerationSpec noise_only(NoiseLaw law) {
    GenerationSpec g{.p = 4,
                     .noise = law,
                     .means = std::vector<VisitMean>(4),
                     .baseline_mean = 0.0,
                     .baseline_sd = 1.0,
                     .covariance = scenario_covariance(CovarianceCase::Unstructured),
                     .retention = {std::vector<double>(4, 1.0), std::vector<double>(4, 1.0)},
                     .allocation = {0.5, 0.5},
                     .factor_probs = {},
                     .factor_effects = {}};
    return g;
}

struct Moments {
    Matrix cov;
    Vector skew;
    long count = 0;
};

Moments outcome_moments(const GenerationSpec& gen, int n, int reps, std::uint64_t seed) {
    Vector s1 = Vector::Zero(4);
    Matrix s2 = Matrix::Zero(4, 4);
    std::vector<std::vector<double>> all(4);
    long count = 0;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::for_stream(seed, r);
        const MonotoneDataset d = generate_dataset(gen, n, rng);
        const Matrix y = d.outcomes(4);
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const Vector v = y.row(i).transpose();
            s1 += v;
            s2 += v * v.transpose();
            for (int j = 0; j < 4; ++j) all[j].push_back(v(j));
            ++count;
        }
    }
    Moments m;
    m.count = count;
    const Vector mean = s1 / count;
    m.cov = s2 / count - mean * mean.transpose();
    m.skew.resize(4);
    for (int j = 0; j < 4; ++j) {
        double c2 = 0, c3 = 0;
        for (double x : all[j]) {
            c2 += std::pow(x - mean(j), 2);
            c3 += std::pow(x - mean(j), 3);
        }
        c2 /= count;
        c3 /= count;
        m.skew(j) = c3 / std::pow(c2, 1.5);
    }
    return m;
}

void expect_covariance_close(const Matrix& got, const Matrix& want, double rel) {
    for (int j = 0; j < want.rows(); ++j) {
        for (int k = 0; k < want.cols(); ++k) {
            EXPECT_LT(std::abs(got(j, k) - want(j, k)), rel * std::sqrt(want(j, j) * want(k, k)))
                << "entry " << j << ',' << k;
        }
    }
}

}  // namespace

TEST(Generate, SkewNormalWithZeroKappaIsNormal) {
    const GenerationSpec a = scenario_generator(Scenario::OneCovariate, CovarianceCase::Ar1, -8);
    const GenerationSpec b = scenario_generator(Scenario::OneCovariate, CovarianceCase::Ar1, -8, NoiseLaw::skew_normal(0.0));
    Rng r1(5), r2(5);
    const MonotoneDataset d1 = generate_dataset(a, 50, r1);
    const MonotoneDataset d2 = generate_dataset(b, 50, r2);
    ASSERT_EQ(d1.size(), d2.size());
    EXPECT_EQ(d1.patterns(), d2.patterns());
    EXPECT_EQ(d1.outcomes(1), d2.outcomes(1));
    EXPECT_EQ(d1.outcomes(4), d2.outcomes(4));
}

TEST(Generate, CovarianceMatchesTargetForEveryLaw) {
    const Matrix sigma = target_sigma();
    for (NoiseLaw law : {NoiseLaw::normal(), NoiseLaw::multivariate_t(10.0), NoiseLaw::multivariate_t(1e6),
                         NoiseLaw::skew_normal(0.8)}) {
        const Moments m = outcome_moments(noise_only(law), 1000, 250, 17);
        ASSERT_GE(m.count * 4, 1000000);
        expect_covariance_close(m.cov, sigma, 0.02);
    }
}

TEST(Generate, SkewNormalMarginalSkewness) {
    const double kappa = 0.8;
    const Moments m = outcome_moments(noise_only(NoiseLaw::skew_normal(kappa)), 1000, 250, 23);
    const double a = 1 - 2 * kappa * kappa / std::numbers::pi;
    const double expect = std::pow(kappa, 3) * std::sqrt(2 / std::numbers::pi) * (4 / std::numbers::pi - 1) / std::pow(a, 1.5);
    // Sample skewness has standard error about sqrt(6 / N) near normality.
    const double tol = 4 * std::sqrt(6.0 / m.count) + 0.01;
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(m.skew(j), expect, tol);

    const Moments neg = outcome_moments(noise_only(NoiseLaw::skew_normal(-kappa)), 1000, 50, 29);
    for (int j = 0; j < 4; ++j) EXPECT_LT(neg.skew(j), 0.0);
}

TEST(Generate, InfeasibleSkewMixing) {
    const Matrix cs = materialize_covariance(scenario_covariance(CovarianceCase::CompoundSymmetry), 4);
    EXPECT_THROW(skew_normal_r2(cs, 0.9), NotPositiveDefiniteError);
    EXPECT_NO_THROW(skew_normal_r2(cs, 0.8));
    const GenerationSpec g =
        scenario_generator(Scenario::OneCovariate, CovarianceCase::CompoundSymmetry, -8, NoiseLaw::skew_normal(0.9));
    Rng rng(1);
    EXPECT_THROW(generate_dataset(g, 40, rng), NotPositiveDefiniteError);
}

TEST(Generate, SkewMixingClosedForm) {
    const Matrix sigma = target_sigma();
    const double kappa = 0.5;
    const Matrix r2 = skew_normal_r2(sigma, kappa);
    const Vector sd = sigma.diagonal().cwiseSqrt();
    const Matrix r = sd.cwiseInverse().asDiagonal() * sigma * sd.cwiseInverse().asDiagonal();
    const double a = 1 - 2 * kappa * kappa / std::numbers::pi;
    const double b = (1 - 2 / std::numbers::pi) * kappa * kappa;
    const Matrix want = (a * r - b * Matrix::Ones(4, 4)) / (1 - kappa * kappa);
    EXPECT_LT((r2 - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generate, PatternFrequenciesFollowRetention) {
    GenerationSpec g = noise_only(NoiseLaw::normal());
    g.retention = {std::vector<double>{0.95, 0.85, 0.8, 0.6}, std::vector<double>{1.0, 0.9, 0.75, 0.7}};
    const int n = 2000, reps = 25;
    std::array<std::array<double, 5>, 2> counts{};
    double arm[2] = {0, 0};
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::for_stream(31, r);
        const MonotoneDataset d = generate_dataset(g, n, rng);
        for (int grp = 0; grp < 2; ++grp) {
            for (int t = 0; t <= 4; ++t) {
                counts[grp][t] += d.pattern_count(t, grp);
                arm[grp] += d.pattern_count(t, grp);
            }
        }
    }
    EXPECT_EQ(arm[0], arm[1]);
    for (int grp = 0; grp < 2; ++grp) {
        const auto& pi = g.retention[grp];
        for (int t = 0; t <= 4; ++t) {
            const double upper = t == 0 ? 1.0 : pi[t - 1];
            const double lower = t == 4 ? 0.0 : pi[t];
            const double prob = upper - lower;
            const double se = std::sqrt(prob * (1 - prob) / arm[grp]);
            EXPECT_NEAR(counts[grp][t] / arm[grp], prob, 4 * se + 1e-12) << "arm " << grp << " pattern " << t;
        }
    }
}

TEST(Generate, FactorAddsDummyColumns) {
    const GenerationSpec g = scenario_generator(Scenario::Factor, CovarianceCase::Unstructured, -8);
    EXPECT_EQ(g.covariate_count(), 3);
    Rng rng(3);
    const MonotoneDataset d = generate_dataset(g, 300, rng);
    EXPECT_EQ(d.covariate_count(), 3);
    double levels[3] = {0, 0, 0};
    for (const auto& s : d.subjects()) {
        const double d2 = s.covariates[1], d3 = s.covariates[2];
        EXPECT_TRUE(d2 == 0.0 || d2 == 1.0);
        EXPECT_TRUE(d3 == 0.0 || d3 == 1.0);
        EXPECT_LE(d2 + d3, 1.0);
        levels[d2 == 1.0 ? 1 : d3 == 1.0 ? 2 : 0] += 1;
    }
    EXPECT_NEAR(levels[0] / 300, 0.3, 0.1);
    EXPECT_NEAR(levels[1] / 300, 0.4, 0.1);
}

TEST(Replications, DeterministicAcrossWorkerCounts) {
    const GenerationSpec g = scenario_generator(Scenario::OneCovariate, CovarianceCase::Unstructured, -8);
    ReplicationOptions one{.workers = 1, .keep_records = true};
    ReplicationOptions four{.workers = 4, .keep_records = true};
    const ReplicationSummary a = run_replications(g, {}, 39, 60, 77, one);
    const ReplicationSummary b = run_replications(g, {}, 39, 60, 77, four);
    EXPECT_EQ(a.rejections, b.rejections);
    EXPECT_EQ(a.failures, b.failures);
    EXPECT_EQ(a.mean_estimate, b.mean_estimate);
    EXPECT_EQ(a.sd_estimate, b.sd_estimate);
    EXPECT_EQ(a.mean_df, b.mean_df);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].estimate, b.records[i].estimate);
        EXPECT_EQ(a.records[i].se, b.records[i].se);
    }
    const ReplicationSummary c = run_replications(g, {}, 39, 60, 78, one);
    EXPECT_NE(a.mean_estimate, c.mean_estimate);
}

TEST(Replications, SummaryIsConsistent) {
    const GenerationSpec g = scenario_generator(Scenario::OneCovariate, CovarianceCase::Ar1, -12);
    const ReplicationSummary s = run_replications(g, {}, 21, 100, 5, {.workers = 2});
    EXPECT_EQ(s.reps, 100);
    EXPECT_EQ(s.n, 21);
    EXPECT_EQ(s.seed, 5u);
    const int ok = s.reps - s.failures;
    EXPECT_DOUBLE_EQ(s.simulated_power, static_cast<double>(s.rejections) / ok);
    EXPECT_NEAR(s.mc_se, std::sqrt(s.simulated_power * (1 - s.simulated_power) / ok), 1e-15);
    EXPECT_LE(s.min_df, s.mean_df);
    EXPECT_LE(s.mean_df, s.max_df);
}

TEST(Replications, NullRejectionRateNearAlpha) {
    const GenerationSpec g = scenario_generator(Scenario::OneCovariate, CovarianceCase::Unstructured, 0.0);
    const ReplicationSummary s = run_replications(g, {}, 40, 1500, 11, {.workers = 4});
    EXPECT_NEAR(s.simulated_power, 0.05, 3 * std::sqrt(0.05 * 0.95 / 1500));
}

TEST(Replications, AbortsWhenFitsFail) {
    // Six subjects cannot support five fixed effects per visit.
    GenerationSpec g = scenario_generator(Scenario::Factor, CovarianceCase::Unstructured, -8);
    EXPECT_THROW(run_replications(g, {}, 6, 40, 1), SimulationFailureError);
}

TEST(GenerationValidation, RejectsBadInput) {
    GenerationSpec g = noise_only(NoiseLaw::multivariate_t(2.0));
    EXPECT_THROW(g.validate(), InvalidSpecError);
    g = noise_only(NoiseLaw::skew_normal(1.0));
    EXPECT_THROW(g.validate(), InvalidSpecError);
    g = noise_only(NoiseLaw::normal());
    g.means.pop_back();
    EXPECT_THROW(g.validate(), InvalidSpecError);
}
