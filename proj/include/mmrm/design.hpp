#pragma once

#include "mmrm/covariance.hpp"
#include "mmrm/ldl.hpp"

#include <array>
#include <optional>
#include <vector>

namespace mmrm {

/// Planning inputs for a two-arm trial with p post-baseline visits.
/// Arm index 0 is placebo, 1 is active.
struct DesignSpec {
    int p = 0;
    std::array<double, 2> allocation{0.5, 0.5};    // gamma_g
    std::array<std::vector<double>, 2> retention;  // pi_gt, t = 1..p
    CovarianceModel covariance;
    double tau = 0.0;  // effect at the last visit
    double alpha = 0.05;
    double target_power = 0.9;
    int qstar = 0;
    std::optional<int> strata;     // h pre-stratification levels
    std::optional<double> imbalance;  // D = mu_d' Sigma_x^{-1} mu_d

    /// Number of fixed effects per visit: q* + 2, or q* + h + 1 with strata.
    int q() const;
    /// Throws InvalidSpecError on the first violated constraint.
    void validate() const;
    /// Pooled retention pi_bar_t = sum_g gamma_g pi_gt, t = 1..p.
    Vector pooled_retention() const;
    /// varpi_pi_t = sum_g 1 / (gamma_g pi_gt).
    Vector varpi_pi() const;
    /// LDL factors of the covariance; closed forms for CS and AR(1).
    LdlFactors factors() const;
};

/// varpi_x_t(n): n times the expected V_x at visit t.
double varpi_x(double n, const DesignSpec& spec, int t);
/// varpi_x_t(n) / n.
double expected_vx(double n, const DesignSpec& spec, int t);
/// n times the expected variance of tau_hat at the last visit.
double varpi_tau(double n, const DesignSpec& spec);
/// sum_j l_pj^2 s_j varpi_pi_j, the large-sample limit of varpi_tau.
double varpi_tau_star(const DesignSpec& spec);
/// f_o: share of information carried by subjects retained at visit 1.
double design_df_fraction(const DesignSpec& spec);
/// f(n) = (n pi_bar_1 - q) f_o.
double design_df(double n, const DesignSpec& spec);

struct PowerResult {
    double n = 0.0;
    double lambda_sqrt_n = 0.0;  // tau / sqrt(varpi_tau / n)
    double df = 0.0;
    double power_exact = 0.0;   // both tails of the noncentral t
    double power_approx = 0.0;  // central t shifted by sqrt(n)|lambda|
    double varpi_tau = 0.0;
    std::vector<double> varpi_x;  // visits 1..p
    double variance_n = 0.0;      // size at which varpi_tau was evaluated
};

/// Wald-test power at total size n. The degrees of freedom always use n; the
/// variance factor varpi_tau is evaluated at `variance_n` when given (the
/// two-step tables evaluate it at n_l) and at n otherwise.
PowerResult power_exact(double n, const DesignSpec& spec, std::optional<double> variance_n = std::nullopt);

/// Tail term of the normal-approximation size.
enum class TailMode {
    Auto,        // full sum when pi_bar_p < 0.5, simplified otherwise
    FullSum,     // q* sum_j b_j / pi_bar_j
    Simplified,  // q* / pi_bar_p
};

double size_tail_term(const DesignSpec& spec, TailMode mode = TailMode::Auto);

/// Step-1 normal-approximation size n_l, rounded up.
int size_normal_approx(const DesignSpec& spec, TailMode mode = TailMode::Auto);

struct SampleSizeOptions {
    TailMode tail = TailMode::Auto;
    bool allow_bisection = true;  // when f(n_l) < bisection_df_threshold
    double bisection_df_threshold = 12.0;
    bool inflate_nl = false;      // evaluate step 2 at n_l + 2
    int max_n = 10000000;
};

struct SampleSizePlan {
    int nl = 0;
    double nu = 0.0;
    double nu_star = 0.0;
    double df_at_nl = 0.0;
    /// ceil(n_u) and its power with varpi_tau held at the step-2 size.
    int two_step_n = 0;
    double two_step_power = 0.0;
    /// Recommended size: two_step_n, or the bisection result when used.
    int final_n = 0;
    double nominal_power = 0.0;  // exact power at final_n, varpi_tau(final_n)
    std::array<int, 2> per_arm{0, 0};
    bool used_bisection = false;
};

/// Smallest size for which varpi_tau is defined: n pi_bar_t > q + 1 at every visit.
int minimum_design_size(const DesignSpec& spec);

/// Two-step size; falls back to integer bisection on the exact power when the
/// design d.f. at n_l is small. Throws InfeasibleError past options.max_n.
SampleSizePlan size_two_step(const DesignSpec& spec, const SampleSizeOptions& options = {});

/// Split n into (n_0, n_1) following the allocation, |n_1 - n_0| <= 1 for equal allocation.
std::array<int, 2> split_arms(int n, const std::array<double, 2>& allocation);

}  // namespace mmrm
