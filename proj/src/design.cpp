#include "mmrm/design.hpp"

#include "mmrm/errors.hpp"
#include "mmrm/statdist.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmrm {

int DesignSpec::q() const { return strata ? qstar + *strata + 1 : qstar + 2; }

void DesignSpec::validate() const {
    if (p < 1) {
        throw InvalidSpecError("p must be at least 1");
    }
    if (!(allocation[0] > 0.0) || !(allocation[1] > 0.0) ||
        std::abs(allocation[0] + allocation[1] - 1.0) > 1e-9) {
        throw InvalidSpecError("allocation must be positive and sum to 1");
    }
    for (int g = 0; g < 2; ++g) {
        const auto& r = retention[g];
        if (static_cast<int>(r.size()) != p) {
            throw InvalidSpecError("retention for arm " + std::to_string(g) + " needs " + std::to_string(p) +
                                   " entries");
        }
        double prev = 1.0;
        for (int t = 0; t < p; ++t) {
            if (!(r[t] > 0.0) || r[t] > prev) {
                throw InvalidSpecError("retention must satisfy 1 >= pi_g1 >= ... >= pi_gp > 0 (arm " +
                                       std::to_string(g) + ", visit " + std::to_string(t + 1) + ")");
            }
            prev = r[t];
        }
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidSpecError("alpha must lie in (0, 1)");
    }
    if (!(target_power > 0.0 && target_power < 1.0)) {
        throw InvalidSpecError("target power must lie in (0, 1)");
    }
    if (qstar < 0) {
        throw InvalidSpecError("qstar must be non-negative");
    }
    if (strata && *strata < 1) {
        throw InvalidSpecError("strata count must be at least 1");
    }
    if (imbalance && !(*imbalance >= 0.0)) {
        throw InvalidSpecError("imbalance D must be non-negative");
    }
    if (!std::isfinite(tau)) {
        throw InvalidSpecError("tau must be finite");
    }
    materialize_covariance(covariance, p);
}

Vector DesignSpec::pooled_retention() const {
    Vector out(p);
    for (int t = 0; t < p; ++t) {
        out(t) = allocation[0] * retention[0][t] + allocation[1] * retention[1][t];
    }
    return out;
}

Vector DesignSpec::varpi_pi() const {
    Vector out(p);
    for (int t = 0; t < p; ++t) {
        out(t) = 1.0 / (allocation[0] * retention[0][t]) + 1.0 / (allocation[1] * retention[1][t]);
    }
    return out;
}

LdlFactors DesignSpec::factors() const {
    if (const auto* cs = std::get_if<CompoundSymmetry>(&covariance.value())) {
        return cs_factors(cs->h, cs->rho, p);
    }
    if (const auto* ar = std::get_if<Ar1>(&covariance.value())) {
        return ar1_factors(ar->h, ar->rho, p);
    }
    return ldl_decompose(materialize_covariance(covariance, p));
}

namespace {

/// l_pj^2 sigma_j^2 for j = 1..p.
Vector last_row_weights(const DesignSpec& spec) {
    const LdlFactors f = spec.factors();
    const Vector l = f.lower().row(spec.p - 1).transpose();
    return l.cwiseProduct(l).cwiseProduct(f.innovations());
}

double varpi_tau_with(double n, const DesignSpec& spec, const Vector& w) {
    const Vector pibar = spec.pooled_retention();
    const int q = spec.q();
    Vector x(spec.p);
    for (int t = 1; t <= spec.p; ++t) {
        x(t - 1) = varpi_x(n, spec, t);
    }
    double total = w.dot(x);
    for (int j = 2; j <= spec.p; ++j) {
        double inner = 0.0;
        for (int t = 1; t < j; ++t) {
            inner += x(j - 1) - x(t - 1);
        }
        total += w(j - 1) * inner / (n * pibar(j - 1) - q);
    }
    return total;
}

}  // namespace

double varpi_x(double n, const DesignSpec& spec, int t) {
    if (t < 1 || t > spec.p) {
        throw DimensionMismatchError("visit out of range");
    }
    const double pibar = spec.pooled_retention()(t - 1);
    const double denom = n * pibar - spec.q() - 1;
    if (!(denom > 0.0)) {
        throw DegenerateDesignError("n pi_bar_" + std::to_string(t) + " = " + std::to_string(n * pibar) +
                                    " does not exceed q + 1 = " + std::to_string(spec.q() + 1));
    }
    double out = spec.varpi_pi()(t - 1) * (1.0 + spec.qstar / denom);
    if (spec.imbalance) {
        out += n * *spec.imbalance / denom;
    }
    return out;
}

double expected_vx(double n, const DesignSpec& spec, int t) { return varpi_x(n, spec, t) / n; }

double varpi_tau(double n, const DesignSpec& spec) { return varpi_tau_with(n, spec, last_row_weights(spec)); }

double varpi_tau_star(const DesignSpec& spec) { return last_row_weights(spec).dot(spec.varpi_pi()); }

double design_df_fraction(const DesignSpec& spec) {
    const Vector w = last_row_weights(spec);
    const Vector vp = spec.varpi_pi();
    return w.sum() * vp(0) / w.dot(vp);
}

double design_df(double n, const DesignSpec& spec) {
    const double f = (n * spec.pooled_retention()(0) - spec.q()) * design_df_fraction(spec);
    if (!(f > 0.0)) {
        throw DegenerateDesignError("design degrees of freedom are not positive at n = " + std::to_string(n));
    }
    return f;
}

PowerResult power_exact(double n, const DesignSpec& spec, std::optional<double> variance_n) {
    PowerResult r;
    r.n = n;
    r.variance_n = variance_n.value_or(n);
    r.df = design_df(n, spec);
    r.varpi_tau = varpi_tau(r.variance_n, spec);
    if (!(r.varpi_tau > 0.0)) {
        throw DegenerateDesignError("expected treatment variance is not positive");
    }
    r.varpi_x.reserve(spec.p);
    for (int t = 1; t <= spec.p; ++t) {
        r.varpi_x.push_back(varpi_x(r.variance_n, spec, t));
    }
    r.lambda_sqrt_n = spec.tau / std::sqrt(r.varpi_tau / n);
    const double crit = t_quantile(1.0 - 0.5 * spec.alpha, r.df);
    const NoncentralT dist{r.df, r.lambda_sqrt_n};
    r.power_exact = (1.0 - noncentral_t_cdf(crit, dist)) + noncentral_t_cdf(-crit, dist);
    r.power_approx = t_cdf(std::abs(r.lambda_sqrt_n) - crit, r.df);
    return r;
}

double size_tail_term(const DesignSpec& spec, TailMode mode) {
    const Vector pibar = spec.pooled_retention();
    if (mode == TailMode::Auto) {
        mode = pibar(spec.p - 1) < 0.5 ? TailMode::FullSum : TailMode::Simplified;
    }
    if (mode == TailMode::Simplified) {
        return spec.qstar / pibar(spec.p - 1);
    }
    const Vector w = last_row_weights(spec).cwiseProduct(spec.varpi_pi());
    const Vector b = w / w.sum();
    return spec.qstar * b.cwiseQuotient(pibar).sum();
}

int size_normal_approx(const DesignSpec& spec, TailMode mode) {
    spec.validate();
    if (spec.tau == 0.0) {
        throw InfeasibleError("no finite size detects a zero effect");
    }
    const double z = normal_quantile(1.0 - 0.5 * spec.alpha) + normal_quantile(spec.target_power);
    const double n = z * z * varpi_tau_star(spec) / (spec.tau * spec.tau) + size_tail_term(spec, mode);
    return static_cast<int>(std::ceil(n - 1e-9));
}

int minimum_design_size(const DesignSpec& spec) {
    const Vector pibar = spec.pooled_retention();
    const double need = spec.q() + 1;
    int n = static_cast<int>(std::floor(need / pibar.minCoeff())) + 1;
    while (n * pibar.minCoeff() <= need) {
        ++n;
    }
    return n;
}

std::array<int, 2> split_arms(int n, const std::array<double, 2>& allocation) {
    const int n1 = static_cast<int>(std::lround(n * allocation[1]));
    return {n - n1, n1};
}

SampleSizePlan size_two_step(const DesignSpec& spec, const SampleSizeOptions& options) {
    SampleSizePlan plan;
    plan.nl = size_normal_approx(spec, options.tail);
    const int floor_n = minimum_design_size(spec);
    const double step2_n = std::max(plan.nl + (options.inflate_nl ? 2 : 0), floor_n);

    plan.df_at_nl = design_df(step2_n, spec);
    const double tsum =
        t_quantile(1.0 - 0.5 * spec.alpha, plan.df_at_nl) + t_quantile(spec.target_power, plan.df_at_nl);
    const double tau2 = spec.tau * spec.tau;
    plan.nu = tsum * tsum * varpi_tau(step2_n, spec) / tau2;
    plan.nu_star = tsum * tsum * varpi_tau_star(spec) / tau2 + size_tail_term(spec, options.tail);
    plan.two_step_n = std::max(static_cast<int>(std::ceil(plan.nu - 1e-9)), floor_n);
    if (plan.two_step_n > options.max_n) {
        throw InfeasibleError("required size exceeds " + std::to_string(options.max_n));
    }
    plan.two_step_power = power_exact(plan.two_step_n, spec, step2_n).power_exact;

    plan.used_bisection = options.allow_bisection && plan.df_at_nl < options.bisection_df_threshold;
    if (!plan.used_bisection) {
        plan.final_n = plan.two_step_n;
        plan.nominal_power = plan.two_step_power;
    } else {
        auto reaches = [&](int n) {
            try {
                return power_exact(n, spec).power_exact >= spec.target_power;
            } catch (const DegenerateDesignError&) {
                return false;
            }
        };
        int lo = floor_n;
        if (reaches(lo)) {
            plan.final_n = lo;
        } else {
            int hi = std::max(4 * plan.nl, 200);
            while (!reaches(hi)) {
                lo = hi;
                if (hi >= options.max_n) {
                    throw InfeasibleError("no size up to " + std::to_string(options.max_n) + " reaches the target power");
                }
                hi = std::min(2 * hi, options.max_n);
            }
            // reaches(lo) is false, reaches(hi) is true.
            while (hi - lo > 1) {
                const int mid = lo + (hi - lo) / 2;
                (reaches(mid) ? hi : lo) = mid;
            }
            plan.final_n = hi;
        }
        plan.nominal_power = power_exact(plan.final_n, spec).power_exact;
    }
    plan.per_arm = split_arms(plan.final_n, spec.allocation);
    return plan;
}

}  // namespace mmrm
