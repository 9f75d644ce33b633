#include "mmrm/statdist.hpp"

#include "mmrm/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mmrm {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kSeriesTolerance = 1e-12;

double poly(const double* c, int n, double x) {
    double s = c[n - 1];
    for (int i = n - 2; i >= 0; --i) {
        s = s * x + c[i];
    }
    return s;
}

double as241(double p) {
    static constexpr double a[] = {3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
                                   1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                   3.3430575583588128105e+4, 2.5090809287301226727e+3};
    static constexpr double b[] = {1.0,
                                   4.2313330701600911252e+1,
                                   6.8718700749205790830e+2,
                                   5.3941960214247511077e+3,
                                   2.1213794301586595867e+4,
                                   3.9307895800092710610e+4,
                                   2.8729085735721942674e+4,
                                   5.2264952788528545610e+3};
    static constexpr double c[] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                                   3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                                   2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double d[] = {1.0,
                                   2.05319162663775882187e0,
                                   1.67638483018380384940e0,
                                   6.89767334985100004550e-1,
                                   1.48103976427480074590e-1,
                                   1.51986665636164571966e-2,
                                   5.47593808499534494600e-4,
                                   1.05075007164441684324e-9};
    static constexpr double e[] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                                   2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                   2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[] = {1.0,
                                   5.99832206555887937690e-1,
                                   1.36929880922735805310e-1,
                                   1.48753612908506148525e-2,
                                   7.86869131145613259100e-4,
                                   1.84631831751005468180e-5,
                                   1.42151175831644588870e-7,
                                   2.04426310338993978564e-15};
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(a, 8, r) / poly(b, 8, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = poly(c, 8, r) / poly(d, 8, r);
    } else {
        r -= 5.0;
        x = poly(e, 8, r) / poly(f, 8, r);
    }
    return q < 0.0 ? -x : x;
}

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for
// x < (a + 1) / (a + b + 2).
double beta_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) {
            return h;
        }
    }
    throw NonConvergenceError("incomplete beta continued fraction did not converge");
}

// I_x(a, b) given both x and xc = 1 - x, so callers near 1 keep precision.
double ibeta(double a, double b, double x, double xc) {
    if (x <= 0.0) return 0.0;
    if (xc <= 0.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(xc);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_fraction(b, a, xc) / b;
}

void require_df(double df) {
    if (!(df > 0.0) || !std::isfinite(df)) {
        throw DomainError("degrees of freedom must be positive and finite, got " + std::to_string(df));
    }
}

void require_probability(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("probability must lie in (0, 1), got " + std::to_string(p));
    }
}

// P(T > x) for x >= 0.
double t_upper(double x, double df) {
    const double x2 = x * x;
    return 0.5 * ibeta(0.5 * df, 0.5, df / (df + x2), x2 / (df + x2));
}

// P(t(f, ncp) <= x) for x >= 0.
double noncentral_cdf_nonnegative(double x, double df, double ncp) {
    const double x2 = x * x;
    const double y = x2 / (x2 + df);
    const double yc = df / (x2 + df);
    double total = normal_cdf(-ncp);
    if (y <= 0.0) {
        return total;
    }
    const double lambda = 0.5 * ncp * ncp;
    const double b = 0.5 * df;
    const double log_y = std::log(y);
    const double log_yc = std::log(yc);
    const long mode = static_cast<long>(std::floor(lambda));
    const double k = static_cast<double>(mode);

    // Poisson weights p_k and q_k at the mode.
    const double log_pois = lambda > 0.0 ? -lambda + k * std::log(lambda) : 0.0;
    const double p0 = std::exp(log_pois - std::lgamma(k + 1.0));
    const double q0 = lambda > 0.0 ? ncp / std::numbers::sqrt2 * std::exp(log_pois - std::lgamma(k + 1.5)) : 0.0;

    // I_y(a, b) and the recurrence step g(a) = I_y(a, b) - I_y(a + 1, b).
    auto step = [&](double a) {
        return std::exp(std::lgamma(a + b) - std::lgamma(a + 1.0) - std::lgamma(b) + a * log_y + b * log_yc);
    };
    const double ip0 = ibeta(k + 0.5, b, y, yc);
    const double iq0 = ibeta(k + 1.0, b, y, yc);
    const double gp0 = step(k + 0.5);
    const double gq0 = step(k + 1.0);

    double sum = p0 * ip0 + q0 * iq0;

    // Forward from the mode.
    {
        double pw = p0, qw = q0, ip = ip0, iq = iq0, gp = gp0, gq = gq0;
        for (long j = mode + 1, it = 0;; ++j, ++it) {
            if (it > kMaxIterations) {
                throw NonConvergenceError("noncentral t series did not converge");
            }
            const double jd = static_cast<double>(j);
            pw *= lambda / jd;
            qw *= lambda / (jd + 0.5);
            ip -= gp;
            iq -= gq;
            gp *= y * (jd - 0.5 + b) / (jd + 0.5);
            gq *= y * (jd + b) / (jd + 1.0);
            const double term = pw * ip + qw * iq;
            sum += term;
            const double r = lambda / (jd + 1.0);
            const double bound = (pw + std::abs(qw)) * (r < 1.0 ? r / (1.0 - r) : 1e300);
            if (bound * std::max(ip, 0.0) < kSeriesTolerance || (pw + std::abs(qw)) < kSeriesTolerance * 1e-4) {
                break;
            }
        }
    }
    // Backward from the mode.
    {
        double pw = p0, qw = q0, ip = ip0, iq = iq0, gp = gp0, gq = gq0;
        for (long j = mode - 1; j >= 0; --j) {
            if (mode - j > kMaxIterations) {
                throw NonConvergenceError("noncentral t series did not converge");
            }
            const double jd = static_cast<double>(j);
            pw *= (jd + 1.0) / lambda;
            qw *= (jd + 1.5) / lambda;
            gp *= (jd + 1.5) / (y * (jd + 0.5 + b));
            gq *= (jd + 2.0) / (y * (jd + 1.0 + b));
            ip += gp;
            iq += gq;
            sum += pw * ip + qw * iq;
            const double r = jd / lambda;
            const double bound = (pw + std::abs(qw)) * r / (1.0 - r);
            if (bound < kSeriesTolerance) {
                break;
            }
        }
    }
    total += 0.5 * sum;
    return std::min(1.0, std::max(0.0, total));
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    require_probability(p);
    double x = as241(p);
    // One Halley step against erfc to polish the last bits.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double regularized_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("incomplete beta needs positive shape parameters");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError("incomplete beta argument must lie in [0, 1]");
    }
    return ibeta(a, b, x, 1.0 - x);
}

double t_pdf(double x, double df) {
    require_df(df);
    const double log_c = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi);
    return std::exp(log_c - 0.5 * (df + 1.0) * std::log1p(x * x / df));
}

double t_cdf(double x, double df) {
    require_df(df);
    if (std::isnan(x)) {
        throw DomainError("t_cdf argument is NaN");
    }
    if (std::isinf(x)) {
        return x > 0.0 ? 1.0 : 0.0;
    }
    const double upper = t_upper(std::abs(x), df);
    return x >= 0.0 ? 1.0 - upper : upper;
}

double t_quantile(double p, double df) {
    require_probability(p);
    require_df(df);
    if (p == 0.5) {
        return 0.0;
    }
    // Solve on the upper half; the lower half follows by symmetry.
    const double upper = p > 0.5 ? 1.0 - p : p;  // target P(T > x)
    double lo = 0.0;
    double hi = std::max(1.0, -normal_quantile(upper));
    while (t_upper(hi, df) > upper) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) {
            throw NonConvergenceError("t quantile bracket overflow");
        }
    }
    double x = std::min(std::max(-normal_quantile(upper), lo), hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = t_upper(x, df) - upper;  // decreasing in x
        if (fx > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double dens = t_pdf(x, df);
        double next = dens > 0.0 ? x + fx / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - x) <= 1e-14 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15 * std::max(1.0, hi)) {
            x = next;
            break;
        }
        x = next;
    }
    return p > 0.5 ? x : -x;
}

double noncentral_t_cdf(double x, const NoncentralT& dist) {
    require_df(dist.df);
    if (!std::isfinite(dist.ncp) || std::isnan(x)) {
        throw DomainError("noncentral t needs a finite noncentrality and a numeric argument");
    }
    if (std::isinf(x)) {
        return x > 0.0 ? 1.0 : 0.0;
    }
    if (x >= 0.0) {
        return noncentral_cdf_nonnegative(x, dist.df, dist.ncp);
    }
    return 1.0 - noncentral_cdf_nonnegative(-x, dist.df, -dist.ncp);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s))};
    engine_.seed(seq);
}

Rng Rng::for_stream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t t = a ^ (index * 0xD1B54A32D192ED03ULL);
    return Rng(splitmix64(t));
}

double Rng::uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

double Rng::gamma(double shape) {
    if (!(shape > 0.0)) {
        throw DomainError("gamma shape must be positive");
    }
    if (shape < 1.0) {
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

}  // namespace mmrm
