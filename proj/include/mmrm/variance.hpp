#pragma once

#include "mmrm/dataset.hpp"
#include "mmrm/reml.hpp"

#include <vector>

namespace mmrm {

/// Which information matrix supplies var(beta_hat_j).
///
/// Expected: sigma_j^2 / (n_j - q) * Sigma_{j-1}^{-1}.
/// Observed: sigma_j^2 (Yprev' Q_j Yprev)^{-1}.
enum class InfoMode { Expected, Observed };

/// Algebraic route for the delta-method variance.
enum class DeltaForm {
    Jacobian,    // sum_j l_pj^2 s_j A_j (Z'Z)^{-1} A_j'
    Decomposed,  // block-inverse expansion into an X'X part and a beta part
};

// Every function below targets the fixed effects at `visit`; 0 means the
// last visit. The KR-type quantities use the fit's scale; the delta
// variance always uses the least-squares scale S_j / (n_j - q - j + 1).

/// Full pq x pq covariance (L kron I) V_w (L' kron I), V_w = diag[s_j (X_j'X_j)^{-1}].
Matrix asymptotic_variance(const MmrmFit& fit);

/// Phi: sum_j l_pj^2 s_j (X_j'X_j)^{-1}.
Matrix phi_p(const MmrmFit& fit, int visit = 0);

/// omega_jt * s_t for t = 1..j-1.
Vector omega_weights(const MmrmFit& fit, InfoMode mode, int j);

Matrix psi_p(const MmrmFit& fit, InfoMode mode = InfoMode::Expected, int visit = 0);
Matrix psi_star(const MmrmFit& fit, InfoMode mode = InfoMode::Expected, int visit = 0);
/// Phi + Psi - Psi*.
Matrix kr_variance(const MmrmFit& fit, InfoMode mode = InfoMode::Expected, int visit = 0);
Matrix delta_variance(const MmrmFit& fit, int visit = 0, DeltaForm form = DeltaForm::Decomposed);

struct VarianceReport {
    Matrix phi;
    Matrix psi;
    Matrix psi_star;
    Matrix kr;
    Matrix delta;
    Matrix asymptotic;  // pq x pq
    InfoMode info_mode = InfoMode::Expected;
    int visit = 0;      // target visit (1-based)
    int tau_index = 0;  // row/column of the treatment effect

    double tau_se_asymptotic() const;
    double tau_se_kr() const;
    double tau_se_delta() const;
};

VarianceReport variance_report(const MmrmFit& fit, InfoMode mode = InfoMode::Expected, int visit = 0);

struct TreatmentVariance {
    double var_tau = 0.0;
    std::vector<double> vx;  // V_x for visits 1..target
};

/// var(tau_hat) assembled from the per-visit design quantities
/// V_x = 1/n_1 + 1/n_0 + Delta' S_x^{-1} Delta. Requires x = (1, x_b, g).
TreatmentVariance treatment_variance_components(const MonotoneDataset& data, const MmrmFit& fit,
                                                InfoMode mode = InfoMode::Expected, int visit = 0);

/// Analysis-stage denominator d.f.: (n_1 - q) f_o with the fitted factors and
/// observed retention, f_o = (sum_j w_j) c_1 / sum_j w_j c_j, w_j = l_pj^2 s_j,
/// c_j = n / n_0j + n / n_1j.
double wald_df(const MonotoneDataset& data, const MmrmFit& fit, int visit = 0);

struct WaldTest {
    double estimate = 0.0;
    double se = 0.0;
    double df = 0.0;
    double statistic = 0.0;
    double p_value = 0.0;  // two-sided
};

/// Two-sided t test of tau = 0 at `visit` with the KR standard error.
WaldTest wald_test_tau(const MonotoneDataset& data, const MmrmFit& fit, InfoMode mode = InfoMode::Expected,
                       int visit = 0);

}  // namespace mmrm
