#include "mmrm/simulate.hpp"

#include "mmrm/design.hpp"
#include "mmrm/errors.hpp"
#include "mmrm/reml.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <thread>

namespace mmrm {

int GenerationSpec::covariate_count() const {
    return 1 + (factor_probs.empty() ? 0 : static_cast<int>(factor_probs.size()) - 1);
}

void GenerationSpec::validate() const {
    if (p < 1) {
        throw InvalidSpecError("p must be at least 1");
    }
    if (static_cast<int>(means.size()) != p) {
        throw InvalidSpecError("need one mean row per visit");
    }
    if (!(baseline_sd >= 0.0)) {
        throw InvalidSpecError("baseline sd must be non-negative");
    }
    if (!(allocation[0] > 0.0) || !(allocation[1] > 0.0) || std::abs(allocation[0] + allocation[1] - 1.0) > 1e-9) {
        throw InvalidSpecError("allocation must be positive and sum to 1");
    }
    for (int g = 0; g < 2; ++g) {
        if (static_cast<int>(retention[g].size()) != p) {
            throw InvalidSpecError("retention for arm " + std::to_string(g) + " needs " + std::to_string(p) +
                                   " entries");
        }
        double prev = 1.0;
        for (double r : retention[g]) {
            if (!(r > 0.0) || r > prev) {
                throw InvalidSpecError("retention rates must be non-increasing within (0, 1]");
            }
            prev = r;
        }
    }
    if (factor_probs.size() != factor_effects.size()) {
        throw InvalidSpecError("factor probabilities and effects differ in length");
    }
    if (!factor_probs.empty()) {
        if (factor_probs.size() < 2) {
            throw InvalidSpecError("a factor needs at least two levels");
        }
        double total = 0.0;
        for (double pr : factor_probs) {
            if (!(pr > 0.0)) {
                throw InvalidSpecError("factor level probabilities must be positive");
            }
            total += pr;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw InvalidSpecError("factor level probabilities must sum to 1");
        }
    }
    switch (noise.kind) {
        case NoiseKind::Normal:
            break;
        case NoiseKind::MultivariateT:
            if (!(noise.t_df > 2.0)) {
                throw InvalidSpecError("multivariate t needs d > 2 for a finite covariance");
            }
            break;
        case NoiseKind::SkewNormal:
            if (!(std::abs(noise.kappa) < 1.0)) {
                throw InvalidSpecError("skew-normal kappa must lie in (-1, 1)");
            }
            break;
    }
    materialize_covariance(covariance, p);
}

Matrix skew_normal_r2(const Matrix& sigma, double kappa) {
    if (!(std::abs(kappa) < 1.0)) {
        throw InvalidSpecError("skew-normal kappa must lie in (-1, 1)");
    }
    const Vector sd_inv = sigma.diagonal().cwiseSqrt().cwiseInverse();
    const Matrix r = sd_inv.asDiagonal() * sigma * sd_inv.asDiagonal();
    const double k2 = kappa * kappa;
    const double a = 1.0 - 2.0 * k2 / std::numbers::pi;
    const double b = (1.0 - 2.0 / std::numbers::pi) * k2;
    const Matrix ones = Matrix::Ones(sigma.rows(), sigma.cols());
    Matrix r2 = (a * r - b * ones) / (1.0 - k2);
    r2 = 0.5 * (r2 + r2.transpose());
    if (!is_positive_definite(r2)) {
        throw NotPositiveDefiniteError("skew-normal mixing matrix R_2 is not positive definite for kappa = " +
                                       std::to_string(kappa));
    }
    return r2;
}

namespace {

/// Per-visit noise draws with covariance sigma under the chosen law.
class NoiseSampler {
public:
    NoiseSampler(const Matrix& sigma, const NoiseLaw& law) : law_(law) {
        const int p = static_cast<int>(sigma.rows());
        if (law_.kind == NoiseKind::SkewNormal && law_.kappa == 0.0) {
            law_.kind = NoiseKind::Normal;  // no shared factor: identical draws to the normal law
        }
        if (law_.kind == NoiseKind::SkewNormal) {
            const Matrix r2 = skew_normal_r2(sigma, law.kappa);
            chol_ = Eigen::LLT<Matrix>(r2).matrixL();
            const double k2 = law.kappa * law.kappa;
            const double a = 1.0 - 2.0 * k2 / std::numbers::pi;
            scale_ = (sigma.diagonal() / a).cwiseSqrt();
            mix_ = std::sqrt(1.0 - k2);
        } else {
            Matrix cov = sigma;
            if (law_.kind == NoiseKind::MultivariateT) {
                cov *= (law.t_df - 2.0) / law.t_df;
            }
            chol_ = Eigen::LLT<Matrix>(cov).matrixL();
        }
        z_.resize(p);
    }

    Vector draw(Rng& rng) {
        for (Eigen::Index k = 0; k < z_.size(); ++k) {
            z_(k) = rng.normal();
        }
        Vector e = chol_ * z_;
        switch (law_.kind) {
            case NoiseKind::Normal:
                return e;
            case NoiseKind::MultivariateT: {
                const double u = rng.chi_square(law_.t_df);
                return e / std::sqrt(u / law_.t_df);
            }
            case NoiseKind::SkewNormal: {
                // Half-normal shared factor, centred so the outcome mean is unchanged.
                const double shared = law_.kappa * (std::abs(rng.normal()) - std::sqrt(2.0 / std::numbers::pi));
                Vector out = (mix_ * e).array() + shared;
                return out.cwiseProduct(scale_);
            }
        }
        return e;
    }

private:
    NoiseLaw law_;
    Matrix chol_;
    Vector scale_;
    double mix_ = 1.0;
    Vector z_;
};

int draw_level(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) {
            return static_cast<int>(k);
        }
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

MonotoneDataset generate_dataset(const GenerationSpec& gen, int n, Rng& rng) {
    gen.validate();
    if (n < 2) {
        throw InvalidSpecError("need at least two subjects");
    }
    const int p = gen.p;
    NoiseSampler noise(materialize_covariance(gen.covariance, p), gen.noise);
    const auto arms = split_arms(n, gen.allocation);
    const int levels = static_cast<int>(gen.factor_probs.size());

    std::vector<SubjectRecord> raw;
    raw.reserve(n);
    for (int i = 0; i < n; ++i) {
        SubjectRecord s;
        s.id = "s" + std::to_string(i + 1);
        s.group = i < arms[0] ? 0 : 1;

        double shift = 0.0;
        int level = 0;
        if (levels > 0) {
            level = draw_level(gen.factor_probs, rng);
            shift = gen.factor_effects[level];
        }
        const double y0 = gen.baseline_mean + shift + gen.baseline_sd * rng.normal();
        s.covariates.push_back(y0);
        for (int k = 1; k < levels; ++k) {
            s.covariates.push_back(level == k ? 1.0 : 0.0);
        }

        const Vector e = noise.draw(rng);
        const double u = rng.uniform();
        const auto& ret = gen.retention[s.group];
        int pattern = 0;
        while (pattern < p && u < ret[pattern]) {
            ++pattern;
        }

        s.outcomes.resize(p);
        for (int j = 0; j < pattern; ++j) {
            const VisitMean& m = gen.means[j];
            s.outcomes[j] = m.intercept + m.baseline * y0 + m.treatment * s.group + shift + e(j);
        }
        raw.push_back(std::move(s));
    }
    return validate_monotone(std::move(raw), p);
}

namespace {

ReplicationRecord one_replication(const GenerationSpec& gen, const AnalysisSettings& analysis, int n,
                                  std::uint64_t seed, int index) {
    ReplicationRecord rec;
    rec.index = index;
    Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(index));
    try {
        const MonotoneDataset data = generate_dataset(gen, n, rng);
        const MmrmFit fit = fit_mmrm(data, ScaleMode::REML);
        const WaldTest w = wald_test_tau(data, fit, analysis.info_mode);
        rec.estimate = w.estimate;
        rec.se = w.se;
        rec.df = w.df;
        if (!(w.df > 0.0)) {
            throw DegenerateDesignError("non-positive test d.f.");
        }
        rec.rejected = std::abs(w.statistic) >= t_quantile(1.0 - 0.5 * analysis.alpha, w.df);
    } catch (const EmptyVisitError&) {
        rec.failed = true;
    } catch (const RankDeficientError&) {
        rec.failed = true;
    } catch (const InsufficientRowsError&) {
        rec.failed = true;
    } catch (const SingularCovariateScatterError&) {
        rec.failed = true;
    } catch (const DegenerateDesignError&) {
        rec.failed = true;
    }
    return rec;
}

}  // namespace

ReplicationSummary run_replications(const GenerationSpec& gen, const AnalysisSettings& analysis, int n, int reps,
                                    std::uint64_t seed, const ReplicationOptions& options) {
    if (reps < 1) {
        throw InvalidSpecError("reps must be at least 1");
    }
    if (!(analysis.alpha > 0.0 && analysis.alpha < 1.0)) {
        throw InvalidSpecError("alpha must lie in (0, 1)");
    }
    gen.validate();
    // Surface configuration errors (e.g. an infeasible skew-normal R_2) once, up front.
    NoiseSampler probe(materialize_covariance(gen.covariance, gen.p), gen.noise);

    std::vector<ReplicationRecord> records(reps);
    const int workers = std::max(1, std::min(options.workers, reps));
    if (workers == 1) {
        for (int i = 0; i < reps; ++i) {
            records[i] = one_replication(gen, analysis, n, seed, i);
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int i = w; i < reps; i += workers) {
                        records[i] = one_replication(gen, analysis, n, seed, i);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    ReplicationSummary s;
    s.reps = reps;
    s.seed = seed;
    s.n = n;
    double sum_est = 0.0, sum_est2 = 0.0, sum_se = 0.0, sum_df = 0.0;
    s.min_df = std::numeric_limits<double>::infinity();
    s.max_df = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        if (r.failed) {
            ++s.failures;
            continue;
        }
        s.rejections += r.rejected ? 1 : 0;
        sum_est += r.estimate;
        sum_est2 += r.estimate * r.estimate;
        sum_se += r.se;
        sum_df += r.df;
        s.min_df = std::min(s.min_df, r.df);
        s.max_df = std::max(s.max_df, r.df);
    }
    const int ok = reps - s.failures;
    if (ok == 0 || s.failures > options.max_failure_rate * reps) {
        throw SimulationFailureError(std::to_string(s.failures) + " of " + std::to_string(reps) +
                                     " replications failed to fit");
    }
    s.simulated_power = static_cast<double>(s.rejections) / ok;
    s.mc_se = std::sqrt(s.simulated_power * (1.0 - s.simulated_power) / ok);
    s.mean_estimate = sum_est / ok;
    s.sd_estimate = ok > 1 ? std::sqrt(std::max(0.0, (sum_est2 - ok * s.mean_estimate * s.mean_estimate) / (ok - 1)))
                           : 0.0;
    s.mean_se = sum_se / ok;
    s.mean_df = sum_df / ok;
    if (options.keep_records) {
        s.records = std::move(records);
    }
    return s;
}

}  // namespace mmrm
