#pragma once

#include "mmrm/dataset.hpp"
#include "mmrm/ldl.hpp"

#include <vector>

namespace mmrm {

/// Least-squares fit of y_j on z = (x', y_1..y_{j-1}) over the n_j subjects
/// observed at visit j.
struct VisitFit {
    int visit = 0;          // 1-based
    int nj = 0;
    int q = 0;
    Vector theta;           // (alpha_under_j', beta_j')'
    double rss = 0.0;       // S_j
    Matrix zz_inv;          // (Z'Z)^{-1}
    Matrix xx_inv;          // (X'X)^{-1} on the same rows
    Matrix prior_coef;      // (X'X)^{-1} X' [y_1..y_{j-1}], q x (j-1)
    double sigma2_ls = 0.0;    // S / (n_j - q - j + 1)
    double sigma2_ml = 0.0;    // S / n_j
    double sigma2_reml = 0.0;  // S / (n_j - q)

    Vector alpha_under() const { return theta.head(q); }
    Vector beta() const { return theta.tail(visit - 1); }
    /// (Y'QY)^{-1}: lower-right (j-1) x (j-1) block of zz_inv.
    Matrix beta_precision_inv() const { return zz_inv.bottomRightCorner(visit - 1, visit - 1); }
};

enum class ScaleMode { LS, ML, REML };

/// Singular values below this fraction of the largest mark a rank-deficient design.
inline constexpr double kRankTolerance = 1e-10;

VisitFit fit_visit(const MonotoneDataset& data, int visit);

struct MmrmFit {
    std::vector<VisitFit> visits;
    LdlFactors factors;  // beta_j and the selected scale
    Matrix alpha;        // q x p, column j-1 = alpha_j
    Matrix sigma_hat;    // L Lambda L'
    ScaleMode scale = ScaleMode::REML;

    int p() const noexcept { return static_cast<int>(visits.size()); }
    int q() const noexcept { return static_cast<int>(alpha.rows()); }
    /// Innovation variance of visit j under the selected scale.
    double sigma2(int visit) const;
    /// Treatment coefficient at `visit`: last row of alpha.
    double tau(int visit) const { return alpha(q() - 1, visit - 1); }
};

double select_scale(const VisitFit& v, ScaleMode mode);

MmrmFit fit_mmrm(const MonotoneDataset& data, ScaleMode scale = ScaleMode::REML);

/// Restricted log-likelihood up to a parameter-free constant:
/// sum_j (q - n_j)/2 log s_j - (Y - Yprev b_j)' Q_j (Y - Yprev b_j) / (2 s_j).
double restricted_loglik(const MonotoneDataset& data, const LdlFactors& factors);

struct ScaleBias {
    double ml;
    double reml;
};

/// E(sigma2_hat) - sigma2 for the ML and REML scale estimators at visit j.
ScaleBias estimator_bias_reference(double sigma2, int visit, int nj, int q);

}  // namespace mmrm
