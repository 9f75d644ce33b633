#include "mmrm/design.hpp"
#include "mmrm/errors.hpp"
#include "mmrm/reml.hpp"
#include "mmrm/scenarios.hpp"
#include "mmrm/simulate.hpp"
#include "mmrm/statdist.hpp"

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace mmrm;

namespace {

DesignSpec simple_spec(int p, double tau, double retention_last = 1.0) {
    DesignSpec s{.p = p,
                 .allocation = {0.5, 0.5},
                 .retention = {},
                 .covariance = CovarianceModel::ar1(25.0, 0.5),
                 .tau = tau,
                 .strata = std::nullopt,
                 .imbalance = std::nullopt};
    for (int g = 0; g < 2; ++g) {
        for (int t = 0; t < p; ++t) s.retention[g].push_back(1.0 - (1.0 - retention_last) * t / std::max(1, p - 1));
    }
    return s;
}

const CovarianceCase kCases[] = {CovarianceCase::Unstructured, CovarianceCase::CompoundSymmetry,
                                 CovarianceCase::Ar1, CovarianceCase::Toeplitz};

}  // namespace

TEST(ExpectedVx, ClosedForms) {
    DesignSpec s = simple_spec(1, 1.0);
    EXPECT_NEAR(expected_vx(100, s, 1), 4.0 / 100, 1e-15);  // q* = 0: no covariate penalty
    s.qstar = 1;
    EXPECT_NEAR(expected_vx(100, s, 1), 4.0 * (1 + 1.0 / 96) / 100, 1e-15);
    s.strata = 3;  // q = 5
    EXPECT_EQ(s.q(), 5);
    EXPECT_NEAR(expected_vx(100, s, 1), 4.0 * (1 + 1.0 / 94) / 100, 1e-15);
    s.strata.reset();
    s.imbalance = 0.2;
    EXPECT_NEAR(expected_vx(100, s, 1), (4.0 * (1 + 1.0 / 96) + 100 * 0.2 / 96) / 100, 1e-15);
    EXPECT_THROW(expected_vx(4, s, 1), DegenerateDesignError);
}

TEST(VarpiTau, NoDropoutDropsSecondSum) {
    DesignSpec s = simple_spec(4, -3.0);
    s.qstar = 1;
    const LdlFactors f = s.factors();
    double expect = 0.0;
    for (int j = 0; j < 4; ++j) expect += std::pow(f.lower()(3, j), 2) * f.innovations()(j) * varpi_x(80, s, j + 1);
    EXPECT_NEAR(varpi_tau(80, s), expect, 1e-12 * expect);
    // Without dropout and covariates the variance is Sigma_pp * varpi_pi.
    s.qstar = 0;
    EXPECT_NEAR(varpi_tau(80, s), 25.0 * 4.0, 1e-10);
    EXPECT_NEAR(design_df_fraction(s), 1.0, 1e-14);
    EXPECT_NEAR(design_df(80, s), 78.0, 1e-12);
}

TEST(VarpiTau, ApproachesLimitFromAbove) {
    const DesignSpec s = scenario_design(Scenario::OneCovariate, CovarianceCase::Unstructured, -8);
    const double star = varpi_tau_star(s);
    double prev = varpi_tau(30, s);
    for (double n : {60.0, 120.0, 1000.0, 1e6}) {
        const double v = varpi_tau(n, s);
        EXPECT_LT(v, prev);
        EXPECT_GT(v, star);
        prev = v;
    }
    EXPECT_NEAR(varpi_tau(1e7, s), star, 1e-4 * star);
}

TEST(DesignDf, FractionAtMostOne) {
    for (CovarianceCase c : kCases) {
        for (Scenario sc : {Scenario::OneCovariate, Scenario::Factor}) {
            const double fo = design_df_fraction(scenario_design(sc, c, -8));
            EXPECT_GT(fo, 0.0);
            EXPECT_LE(fo, 1.0);
        }
    }
}

TEST(PowerExact, NullGivesSize) {
    for (CovarianceCase c : kCases) {
        DesignSpec s = scenario_design(Scenario::OneCovariate, c, 0.0);
        EXPECT_NEAR(power_exact(30, s).power_exact, 0.05, 1e-9);
    }
}

// Published nominal powers carry two decimals; allow 0.02 points.
TEST(PowerExact, PublishedNominalValues) {
    const DesignSpec s1 = scenario_design(Scenario::OneCovariate, CovarianceCase::Unstructured, -12);
    EXPECT_NEAR(100 * power_exact(21, s1, 17).power_exact, 91.86, 0.02);
    const DesignSpec s2 = scenario_design(Scenario::Factor, CovarianceCase::Unstructured, -8);
    EXPECT_NEAR(100 * power_exact(42, s2, 39).power_exact, 90.70, 0.02);
    const DesignSpec s3 = scenario_design(Scenario::OneCovariate, CovarianceCase::Unstructured, -8);
    EXPECT_NEAR(100 * power_exact(39, s3, 36).power_exact, 90.49, 0.02);
}

TEST(PowerExact, MatchesTwoSampleT) {
    // One visit, no dropout, no covariates: the pooled two-sample t test.
    DesignSpec s = simple_spec(1, -4.0);
    s.covariance = CovarianceModel::unstructured(Matrix::Constant(1, 1, 36.0));
    for (int n : {10, 24, 61}) {
        const double df = n - 2;
        const double ncp = -4.0 / std::sqrt(36.0 * 4.0 / n);
        const double crit = boost::math::quantile(boost::math::students_t(df), 0.975);
        const boost::math::non_central_t d(df, ncp);
        const double ref = boost::math::cdf(boost::math::complement(d, crit)) + boost::math::cdf(d, -crit);
        EXPECT_NEAR(power_exact(n, s).power_exact, ref, 1e-9);
    }
}

TEST(PowerExact, MonotoneInSizeAndEffect) {
    for (CovarianceCase c : kCases) {
        const DesignSpec s = scenario_design(Scenario::OneCovariate, c, -8);
        double prev = 0.0;
        for (int n = 12; n <= 80; n += 2) {
            const double pw = power_exact(n, s).power_exact;
            EXPECT_GE(pw, prev);
            prev = pw;
        }
        prev = 0.0;
        for (double tau = 0.0; tau <= 16.0; tau += 1.0) {
            const double pw = power_exact(40, scenario_design(Scenario::OneCovariate, c, -tau)).power_exact;
            EXPECT_GE(pw, prev - 1e-12);
            prev = pw;
        }
    }
}

TEST(PowerExact, ApproximationCloseWithEnoughDf) {
    for (CovarianceCase c : kCases) {
        for (double tau : {-12.0, -8.0, -4.0}) {
            const DesignSpec s = scenario_design(Scenario::OneCovariate, c, tau);
            const SampleSizePlan plan = size_two_step(s);
            const PowerResult r = power_exact(plan.final_n, s);
            ASSERT_GE(r.df, 12.0);
            EXPECT_LT(std::abs(r.power_exact - r.power_approx), 0.002);
            EXPECT_GE(r.power_exact, 0.0);
            EXPECT_LE(r.power_exact, 1.0);
        }
    }
}

TEST(SizeNormalApprox, PublishedAndTextbook) {
    EXPECT_EQ(size_normal_approx(scenario_design(Scenario::OneCovariate, CovarianceCase::Unstructured, -8)), 36);
    EXPECT_EQ(size_normal_approx(scenario_design(Scenario::OneCovariate, CovarianceCase::CompoundSymmetry, -12)),
              19);
    const DesignSpec s = [] {
        DesignSpec d = simple_spec(1, -5.0);
        d.covariance = CovarianceModel::unstructured(Matrix::Constant(1, 1, 49.0));
        return d;
    }();
    const boost::math::normal z;
    const double textbook = std::pow(boost::math::quantile(z, 0.975) + boost::math::quantile(z, 0.9), 2) * 4 * 49 / 25;
    EXPECT_EQ(size_normal_approx(s), static_cast<int>(std::ceil(textbook)));
}

TEST(SizeTwoStep, PublishedRows) {
    auto check = [](Scenario sc, CovarianceCase c, double tau, int nl, double nu_star, double nu, int n) {
        const SampleSizePlan p = size_two_step(scenario_design(sc, c, tau));
        EXPECT_EQ(p.nl, nl);
        EXPECT_NEAR(p.nu_star, nu_star, 0.05);
        EXPECT_NEAR(p.nu, nu, 0.05);
        EXPECT_EQ(p.final_n, n);
        EXPECT_FALSE(p.used_bisection);
    };
    check(Scenario::OneCovariate, CovarianceCase::Unstructured, -8, 36, 38.1, 38.6, 39);
    check(Scenario::OneCovariate, CovarianceCase::Toeplitz, -4, 122, 123.7, 123.9, 124);
    check(Scenario::Factor, CovarianceCase::CompoundSymmetry, -12, 21, 23.8, 27.1, 28);
}

TEST(SizeTwoStep, LowerBoundAndTargetInvariants) {
    for (Scenario sc : {Scenario::OneCovariate, Scenario::Factor}) {
        for (const TableRow& row : table_rows()) {
            const DesignSpec s = scenario_design(sc, row.covariance, row.tau);
            const SampleSizePlan p = size_two_step(s);
            EXPECT_LE(p.nl, static_cast<int>(std::ceil(p.nu)));
            EXPECT_GE(p.nominal_power, s.target_power);
            EXPECT_LE(std::abs(p.per_arm[1] - p.per_arm[0]), 1);
            EXPECT_EQ(p.per_arm[0] + p.per_arm[1], p.final_n);
        }
    }
}

TEST(SizeTwoStep, BisectionForSmallDf) {
    // Large effect: n_l is tiny so f(n_l) < 12 and the exact power is searched.
    DesignSpec s = simple_spec(3, -20.0, 0.8);
    s.qstar = 1;
    const SampleSizePlan p = size_two_step(s);
    ASSERT_TRUE(p.used_bisection);
    EXPECT_GE(power_exact(p.final_n, s).power_exact, s.target_power);
    EXPECT_GE(p.final_n, minimum_design_size(s));
    if (p.final_n > minimum_design_size(s)) {
        EXPECT_LT(power_exact(p.final_n - 1, s).power_exact, s.target_power);
    }

    SampleSizeOptions off;
    off.allow_bisection = false;
    EXPECT_FALSE(size_two_step(s, off).used_bisection);
}

TEST(SizeTwoStep, InfeasibleBeyondCap) {
    DesignSpec s = simple_spec(2, -1e-4);
    SampleSizeOptions o;
    o.max_n = 1000;
    EXPECT_THROW(size_two_step(s, o), InfeasibleError);
}

TEST(SplitArms, BalancedAndProportional) {
    for (int n = 2; n < 60; ++n) {
        const auto a = split_arms(n, {0.5, 0.5});
        EXPECT_EQ(a[0] + a[1], n);
        EXPECT_LE(std::abs(a[1] - a[0]), 1);
    }
    const auto b = split_arms(90, {1.0 / 3, 2.0 / 3});
    EXPECT_EQ(b[0], 30);
    EXPECT_EQ(b[1], 60);
}

TEST(VarpiTau, MatchesMonteCarloVariance) {
    // Empirical var(tau_hat) of the REML fit over simulated trials at n = 200.
    const double tau = -8;
    const GenerationSpec gen = scenario_generator(Scenario::OneCovariate, CovarianceCase::Unstructured, tau);
    const DesignSpec s = scenario_design(Scenario::OneCovariate, CovarianceCase::Unstructured, tau);
    const int reps = 2000;
    double sum = 0, sum2 = 0;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::for_stream(99, r);
        const double t = fit_mmrm(generate_dataset(gen, 200, rng)).tau(4);
        sum += t;
        sum2 += t * t;
    }
    const double var = (sum2 - sum * sum / reps) / (reps - 1);
    // 5% tolerance on top of the sampling error of a variance (sd ~ sqrt(2/reps)).
    EXPECT_NEAR(var / (varpi_tau(200, s) / 200), 1.0, 0.05 + 3 * std::sqrt(2.0 / reps));
}

TEST(DesignSpecValidation, RejectsBadInput) {
    DesignSpec s = simple_spec(2, -1);
    s.retention[0] = {0.8, 0.9};
    EXPECT_THROW(s.validate(), InvalidSpecError);
    s = simple_spec(2, -1);
    s.allocation = {0.6, 0.6};
    EXPECT_THROW(s.validate(), InvalidSpecError);
    s = simple_spec(2, -1);
    s.alpha = 1.5;
    EXPECT_THROW(s.validate(), InvalidSpecError);
}
