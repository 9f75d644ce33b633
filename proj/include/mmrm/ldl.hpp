#pragma once

#include "mmrm/dataset.hpp"

#include <vector>

namespace mmrm {

/// Sigma = L diag(innovations) L' with L unit lower triangular.
///
/// U = L^{-1} is unit lower triangular too; row j of U below the diagonal is
/// -beta_j, where beta_j holds the coefficients of the regression of
/// component j on components 1..j-1.
class LdlFactors {
public:
    /// Build from L and the innovation variances. L must be unit lower
    /// triangular, innovations positive (InvalidModelError otherwise).
    static LdlFactors from_unit_lower(Matrix l, Vector innovations);
    /// Build from the regression rows beta_2..beta_p (betas[0] is empty).
    static LdlFactors from_betas(const std::vector<Vector>& betas, Vector innovations);

    int dim() const noexcept { return static_cast<int>(innovations_.size()); }
    const Matrix& lower() const noexcept { return l_; }
    const Matrix& unit_inverse() const noexcept { return u_; }
    const Vector& innovations() const noexcept { return innovations_; }
    /// beta_j for visit j (1-based); empty for j = 1.
    Vector beta(int visit) const;

    /// L Lambda L'.
    Matrix compose() const;

private:
    LdlFactors(Matrix l, Matrix u, Vector d) : l_(std::move(l)), u_(std::move(u)), innovations_(std::move(d)) {}
    Matrix l_;
    Matrix u_;
    Vector innovations_;
};

/// Sequential-pivot LDL without reordering. Throws NotPositiveDefiniteError
/// when a pivot is not above kPivotTolerance times the largest diagonal.
LdlFactors ldl_decompose(const Matrix& sigma);

inline Matrix ldl_compose(const LdlFactors& f) { return f.compose(); }

/// Closed-form factors of the compound-symmetry matrix.
LdlFactors cs_factors(double h, double rho, int p);

/// Closed-form factors of the AR(1) matrix.
LdlFactors ar1_factors(double h, double rho, int p);

/// Relative pivot tolerance shared by every positive-definiteness check.
inline constexpr double kPivotTolerance = 1e-10;

bool is_positive_definite(const Matrix& m);

/// Inverse of a unit lower-triangular matrix by forward substitution.
Matrix unit_lower_inverse(const Matrix& l);

}  // namespace mmrm
