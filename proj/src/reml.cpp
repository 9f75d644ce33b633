#include "mmrm/reml.hpp"

#include "mmrm/errors.hpp"

#include <cmath>
#include <optional>

namespace mmrm {

namespace {

/// Thin SVD pieces of a full-column-rank matrix.
struct Orthogonal {
    Matrix u;
    Vector s;
    Matrix v;
};

std::optional<Orthogonal> orthogonal_decompose(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    if (s.size() < a.cols() || s.size() == 0 || !(s(s.size() - 1) > kRankTolerance * s(0))) {
        return std::nullopt;
    }
    return Orthogonal{svd.matrixU(), s, svd.matrixV()};
}

Matrix gram_inverse(const Orthogonal& o) {
    const Vector inv2 = o.s.array().square().inverse();
    Matrix g = o.v * inv2.asDiagonal() * o.v.transpose();
    return 0.5 * (g + g.transpose());
}

}  // namespace

VisitFit fit_visit(const MonotoneDataset& data, int visit) {
    if (visit < 1 || visit > data.visits()) {
        throw DimensionMismatchError("visit out of range");
    }
    const int q = data.fixed_effect_count();
    const int nj = data.observed(visit);
    const int params = q + visit - 1;
    if (nj <= params) {
        throw InsufficientRowsError(visit, nj, params + 1);
    }
    const Matrix x = data.design(visit);
    const Matrix outcomes = data.outcomes(visit);
    const Matrix prev = outcomes.leftCols(visit - 1);
    const Vector y = outcomes.col(visit - 1);

    Matrix z(nj, params);
    z << x, prev;
    const auto zdec = orthogonal_decompose(z);
    const auto xdec = zdec ? orthogonal_decompose(x) : std::nullopt;
    if (!zdec || !xdec) {
        throw RankDeficientError(visit);
    }

    VisitFit f;
    f.visit = visit;
    f.nj = nj;
    f.q = q;
    f.theta = zdec->v * (zdec->u.transpose() * y).cwiseQuotient(zdec->s);
    f.rss = (y - z * f.theta).squaredNorm();
    f.zz_inv = gram_inverse(*zdec);
    f.xx_inv = gram_inverse(*xdec);
    f.prior_coef = xdec->v * xdec->s.cwiseInverse().asDiagonal() * (xdec->u.transpose() * prev);
    f.sigma2_ls = f.rss / (nj - params);
    f.sigma2_ml = f.rss / nj;
    f.sigma2_reml = f.rss / (nj - q);
    return f;
}

double select_scale(const VisitFit& v, ScaleMode mode) {
    switch (mode) {
        case ScaleMode::LS:
            return v.sigma2_ls;
        case ScaleMode::ML:
            return v.sigma2_ml;
        case ScaleMode::REML:
            return v.sigma2_reml;
    }
    return v.sigma2_reml;
}

double MmrmFit::sigma2(int visit) const { return factors.innovations()(visit - 1); }

MmrmFit fit_mmrm(const MonotoneDataset& data, ScaleMode scale) {
    const int p = data.visits();
    std::vector<VisitFit> visits;
    visits.reserve(p);
    std::vector<Vector> betas;
    Vector innovations(p);
    for (int j = 1; j <= p; ++j) {
        visits.push_back(fit_visit(data, j));
        betas.push_back(visits.back().beta());
        innovations(j - 1) = select_scale(visits.back(), scale);
        if (!(innovations(j - 1) > 0.0)) {
            throw RankDeficientError(j);  // exact fit leaves no residual variance
        }
    }
    LdlFactors factors = LdlFactors::from_betas(betas, innovations);

    const int q = data.fixed_effect_count();
    Matrix alpha(q, p);
    for (int j = 0; j < p; ++j) {
        Vector a = Vector::Zero(q);
        for (int t = 0; t <= j; ++t) {
            a += factors.lower()(j, t) * visits[t].alpha_under();
        }
        alpha.col(j) = a;
    }
    Matrix sigma_hat = factors.compose();
    return MmrmFit{std::move(visits), std::move(factors), std::move(alpha), std::move(sigma_hat), scale};
}

double restricted_loglik(const MonotoneDataset& data, const LdlFactors& factors) {
    const int p = data.visits();
    if (factors.dim() != p) {
        throw DimensionMismatchError("factors have dimension " + std::to_string(factors.dim()) + ", data has p = " +
                                     std::to_string(p));
    }
    const int q = data.fixed_effect_count();
    double total = 0.0;
    for (int j = 1; j <= p; ++j) {
        const Matrix x = data.design(j);
        const Matrix outcomes = data.outcomes(j);
        Vector r = outcomes.col(j - 1);
        if (j > 1) {
            r -= outcomes.leftCols(j - 1) * factors.beta(j);
        }
        Eigen::HouseholderQR<Matrix> qr(x);
        const Matrix qthin = qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
        const Vector resid = r - qthin * (qthin.transpose() * r);
        const double s2 = factors.innovations()(j - 1);
        const int nj = static_cast<int>(x.rows());
        total += 0.5 * (q - nj) * std::log(s2) - resid.squaredNorm() / (2.0 * s2);
    }
    return total;
}

ScaleBias estimator_bias_reference(double sigma2, int visit, int nj, int q) {
    return ScaleBias{-(q + visit - 1) * sigma2 / nj, -(visit - 1) * sigma2 / (nj - q)};
}

}  // namespace mmrm
