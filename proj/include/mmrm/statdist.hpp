#pragma once

#include <cstdint>
#include <random>

namespace mmrm {

double normal_cdf(double x);
/// Inverse standard normal CDF (Wichura's AS241, about 1e-16 relative).
double normal_quantile(double p);

/// I_x(a, b), the regularized incomplete beta function.
double regularized_beta(double a, double b, double x);

double t_pdf(double x, double df);
double t_cdf(double x, double df);
/// Inverse central t CDF; df need not be an integer.
double t_quantile(double p, double df);

struct NoncentralT {
    double df;
    double ncp;
};

/// P(t(f, ncp) <= x) by the Poisson-weighted incomplete beta series,
/// summed outward from the Poisson mode.
double noncentral_t_cdf(double x, const NoncentralT& dist);

/// Deterministic generator with explicit state. for_stream() derives an
/// independent generator from (master seed, stream index) so that a stream's
/// draws do not depend on which thread consumes it.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    static Rng for_stream(std::uint64_t master, std::uint64_t index);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Gamma(shape, 1).
    double gamma(double shape);
    double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mmrm
