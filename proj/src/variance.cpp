#include "mmrm/variance.hpp"

#include "mmrm/errors.hpp"
#include "mmrm/statdist.hpp"

#include <cmath>

namespace mmrm {

namespace {

int target_visit(const MmrmFit& fit, int visit) {
    const int p = fit.p();
    if (visit == 0) {
        return p;
    }
    if (visit < 1 || visit > p) {
        throw DimensionMismatchError("target visit " + std::to_string(visit) + " outside 1.." + std::to_string(p));
    }
    return visit;
}

double l2(const MmrmFit& fit, int target, int j) {
    const double l = fit.factors.lower()(target - 1, j - 1);
    return l * l;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Matrix asymptotic_variance(const MmrmFit& fit) {
    const int p = fit.p();
    const int q = fit.q();
    const Matrix& l = fit.factors.lower();
    Matrix out = Matrix::Zero(p * q, p * q);
    for (int a = 0; a < p; ++a) {
        for (int b = 0; b <= a; ++b) {
            Matrix block = Matrix::Zero(q, q);
            for (int j = 0; j <= b; ++j) {
                block += l(a, j) * l(b, j) * fit.sigma2(j + 1) * fit.visits[j].xx_inv;
            }
            out.block(a * q, b * q, q, q) = block;
            out.block(b * q, a * q, q, q) = block.transpose();
        }
    }
    return out;
}

Matrix phi_p(const MmrmFit& fit, int visit) {
    const int target = target_visit(fit, visit);
    Matrix out = Matrix::Zero(fit.q(), fit.q());
    for (int j = 1; j <= target; ++j) {
        out += l2(fit, target, j) * fit.sigma2(j) * fit.visits[j - 1].xx_inv;
    }
    return symmetrized(out);
}

Vector omega_weights(const MmrmFit& fit, InfoMode mode, int j) {
    if (j < 1 || j > fit.p()) {
        throw DimensionMismatchError("visit out of range");
    }
    const VisitFit& v = fit.visits[j - 1];
    if (mode == InfoMode::Expected) {
        return Vector::Constant(j - 1, fit.sigma2(j) / (v.nj - v.q));
    }
    const Matrix lj = fit.factors.lower().topLeftCorner(j - 1, j - 1);
    const Matrix var_beta = fit.sigma2(j) * v.beta_precision_inv();
    const Vector omega = (lj.transpose() * var_beta * lj).diagonal();
    return omega.cwiseProduct(fit.factors.innovations().head(j - 1));
}

Matrix psi_p(const MmrmFit& fit, InfoMode mode, int visit) {
    const int target = target_visit(fit, visit);
    Matrix out = Matrix::Zero(fit.q(), fit.q());
    for (int j = 2; j <= target; ++j) {
        const Vector w = omega_weights(fit, mode, j);
        Matrix vd = Matrix::Zero(fit.q(), fit.q());
        for (int t = 1; t < j; ++t) {
            vd += w(t - 1) * (fit.visits[j - 1].xx_inv - fit.visits[t - 1].xx_inv);
        }
        out += l2(fit, target, j) * vd;
    }
    return symmetrized(out);
}

Matrix psi_star(const MmrmFit& fit, InfoMode mode, int visit) {
    const int target = target_visit(fit, visit);
    Matrix out = Matrix::Zero(fit.q(), fit.q());
    for (int j = 2; j <= target; ++j) {
        const VisitFit& v = fit.visits[j - 1];
        const Vector w = omega_weights(fit, mode, j);
        Matrix term = -static_cast<double>(j - 1) / (v.nj - v.q) * fit.sigma2(j) * v.xx_inv;
        for (int t = 1; t < j; ++t) {
            term += w(t - 1) * fit.visits[t - 1].xx_inv;
        }
        out += l2(fit, target, j) * term;
    }
    return symmetrized(out);
}

Matrix kr_variance(const MmrmFit& fit, InfoMode mode, int visit) {
    return phi_p(fit, visit) + psi_p(fit, mode, visit) - psi_star(fit, mode, visit);
}

Matrix delta_variance(const MmrmFit& fit, int visit, DeltaForm form) {
    const int target = target_visit(fit, visit);
    const int q = fit.q();
    Matrix out = Matrix::Zero(q, q);
    for (int j = 1; j <= target; ++j) {
        const VisitFit& v = fit.visits[j - 1];
        const Matrix prior_alpha = fit.alpha.leftCols(j - 1);
        Matrix term;
        if (form == DeltaForm::Jacobian) {
            Matrix jac(q, q + j - 1);
            jac << Matrix::Identity(q, q), prior_alpha;
            term = jac * v.zz_inv * jac.transpose();
        } else {
            const Matrix diff = prior_alpha - v.prior_coef;
            term = v.xx_inv + diff * v.beta_precision_inv() * diff.transpose();
        }
        out += l2(fit, target, j) * v.sigma2_ls * term;
    }
    return symmetrized(out);
}

double VarianceReport::tau_se_asymptotic() const {
    const int q = static_cast<int>(phi.rows());
    const int at = (visit - 1) * q + tau_index;
    return std::sqrt(asymptotic(at, at));
}

double VarianceReport::tau_se_kr() const { return std::sqrt(kr(tau_index, tau_index)); }

double VarianceReport::tau_se_delta() const { return std::sqrt(delta(tau_index, tau_index)); }

VarianceReport variance_report(const MmrmFit& fit, InfoMode mode, int visit) {
    const int target = target_visit(fit, visit);
    VarianceReport r;
    r.phi = phi_p(fit, target);
    r.psi = psi_p(fit, mode, target);
    r.psi_star = psi_star(fit, mode, target);
    r.kr = r.phi + r.psi - r.psi_star;
    r.delta = delta_variance(fit, target);
    r.asymptotic = asymptotic_variance(fit);
    r.info_mode = mode;
    r.visit = target;
    r.tau_index = fit.q() - 1;
    return r;
}

TreatmentVariance treatment_variance_components(const MonotoneDataset& data, const MmrmFit& fit, InfoMode mode,
                                                int visit) {
    const int target = target_visit(fit, visit);
    if (data.visits() != fit.p() || data.fixed_effect_count() != fit.q()) {
        throw DimensionMismatchError("fit does not belong to this dataset");
    }
    const int qstar = data.covariate_count();
    TreatmentVariance out;
    out.vx.reserve(target);
    for (int j = 1; j <= target; ++j) {
        const int rows = data.observed(j);
        double count[2] = {0.0, 0.0};
        Vector mean[2] = {Vector::Zero(qstar), Vector::Zero(qstar)};
        for (int i = 0; i < rows; ++i) {
            const auto& s = data.subjects()[i];
            count[s.group] += 1.0;
            mean[s.group] += Eigen::Map<const Vector>(s.covariates.data(), qstar);
        }
        if (count[0] == 0.0 || count[1] == 0.0) {
            throw SingularCovariateScatterError(j);
        }
        mean[0] /= count[0];
        mean[1] /= count[1];
        double vx = 1.0 / count[0] + 1.0 / count[1];
        if (qstar > 0) {
            Matrix scatter = Matrix::Zero(qstar, qstar);
            for (int i = 0; i < rows; ++i) {
                const auto& s = data.subjects()[i];
                const Vector d = Eigen::Map<const Vector>(s.covariates.data(), qstar) - mean[s.group];
                scatter += d * d.transpose();
            }
            Eigen::LDLT<Matrix> ldlt(scatter);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                !(ldlt.vectorD().minCoeff() > kPivotTolerance * scatter.diagonal().maxCoeff())) {
                throw SingularCovariateScatterError(j);
            }
            const Vector delta = mean[1] - mean[0];
            vx += delta.dot(ldlt.solve(delta));
        }
        out.vx.push_back(vx);
    }

    for (int j = 1; j <= target; ++j) {
        out.var_tau += l2(fit, target, j) * fit.sigma2(j) * out.vx[j - 1];
    }
    for (int j = 2; j <= target; ++j) {
        const Vector w = omega_weights(fit, mode, j);
        double inner = 0.0;
        for (int t = 1; t < j; ++t) {
            inner += w(t - 1) * (out.vx[j - 1] - out.vx[t - 1]);
        }
        out.var_tau += l2(fit, target, j) * inner;
    }
    return out;
}

double wald_df(const MonotoneDataset& data, const MmrmFit& fit, int visit) {
    const int target = target_visit(fit, visit);
    const double n = data.size();
    double weight_sum = 0.0;
    double weighted = 0.0;
    double first = 0.0;
    for (int j = 1; j <= target; ++j) {
        const double n0 = data.observed(j, 0);
        const double n1 = data.observed(j, 1);
        if (n0 == 0.0 || n1 == 0.0) {
            throw SingularCovariateScatterError(j);
        }
        const double c = n / n0 + n / n1;
        const double w = l2(fit, target, j) * fit.sigma2(j);
        if (j == 1) {
            first = c;
        }
        weight_sum += w;
        weighted += w * c;
    }
    return (data.observed(1) - fit.q()) * weight_sum * first / weighted;
}

WaldTest wald_test_tau(const MonotoneDataset& data, const MmrmFit& fit, InfoMode mode, int visit) {
    const int target = target_visit(fit, visit);
    const Matrix kr = kr_variance(fit, mode, target);
    WaldTest w;
    w.estimate = fit.tau(target);
    const double var = kr(fit.q() - 1, fit.q() - 1);
    if (!(var > 0.0)) {
        throw RankDeficientError(target);
    }
    w.se = std::sqrt(var);
    w.df = wald_df(data, fit, target);
    w.statistic = w.estimate / w.se;
    w.p_value = 2.0 * t_cdf(-std::abs(w.statistic), w.df);
    return w;
}

}  // namespace mmrm
