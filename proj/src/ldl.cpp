#include "mmrm/ldl.hpp"

#include "mmrm/errors.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace mmrm {

namespace {

struct Pivots {
    Matrix l;
    Vector d;
};

std::optional<Pivots> sequential_pivots(const Matrix& m) {
    const Eigen::Index p = m.rows();
    if (p == 0 || m.cols() != p) {
        return std::nullopt;
    }
    const double scale = m.diagonal().maxCoeff();
    if (!(scale > 0.0)) {
        return std::nullopt;
    }
    Pivots out{Matrix::Identity(p, p), Vector::Zero(p)};
    for (Eigen::Index j = 0; j < p; ++j) {
        double pivot = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) {
            pivot -= out.l(j, k) * out.l(j, k) * out.d(k);
        }
        if (!(pivot > kPivotTolerance * scale)) {
            return std::nullopt;
        }
        out.d(j) = pivot;
        for (Eigen::Index i = j + 1; i < p; ++i) {
            double v = m(i, j);
            for (Eigen::Index k = 0; k < j; ++k) {
                v -= out.l(i, k) * out.l(j, k) * out.d(k);
            }
            out.l(i, j) = v / pivot;
        }
    }
    return out;
}

void check_cs_ar(double h, double rho, int p) {
    if (p < 1) {
        throw InvalidModelError("visit count must be positive");
    }
    if (!(h > 0.0) || !(std::abs(rho) < 1.0)) {
        throw InvalidModelError("variance must be positive and |rho| < 1");
    }
}

}  // namespace

Matrix unit_lower_inverse(const Matrix& l) {
    const Eigen::Index p = l.rows();
    Matrix u = Matrix::Identity(p, p);
    for (Eigen::Index j = 1; j < p; ++j) {
        for (Eigen::Index k = 0; k < j; ++k) {
            double s = 0.0;
            for (Eigen::Index m = k; m < j; ++m) {
                s += l(j, m) * u(m, k);
            }
            u(j, k) = -s;
        }
    }
    return u;
}

LdlFactors LdlFactors::from_unit_lower(Matrix l, Vector innovations) {
    const Eigen::Index p = innovations.size();
    if (l.rows() != p || l.cols() != p) {
        throw DimensionMismatchError("L and innovations disagree in dimension");
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (l(j, j) != 1.0) {
            throw InvalidModelError("L must have a unit diagonal");
        }
        for (Eigen::Index k = j + 1; k < p; ++k) {
            if (l(j, k) != 0.0) {
                throw InvalidModelError("L must be lower triangular");
            }
        }
        if (!(innovations(j) > 0.0)) {
            throw InvalidModelError("innovation variances must be positive");
        }
    }
    Matrix u = unit_lower_inverse(l);
    return LdlFactors(std::move(l), std::move(u), std::move(innovations));
}

LdlFactors LdlFactors::from_betas(const std::vector<Vector>& betas, Vector innovations) {
    const Eigen::Index p = innovations.size();
    if (static_cast<Eigen::Index>(betas.size()) != p) {
        throw DimensionMismatchError("need one beta row per visit");
    }
    Matrix u = Matrix::Identity(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (betas[j].size() != j) {
            throw DimensionMismatchError("beta row " + std::to_string(j + 1) + " must have " + std::to_string(j) +
                                         " entries");
        }
        if (!(innovations(j) > 0.0)) {
            throw InvalidModelError("innovation variances must be positive");
        }
        u.row(j).head(j) = -betas[j].transpose();
    }
    Matrix l = unit_lower_inverse(u);
    return LdlFactors(std::move(l), std::move(u), std::move(innovations));
}

Vector LdlFactors::beta(int visit) const {
    if (visit < 1 || visit > dim()) {
        throw DimensionMismatchError("visit out of range");
    }
    return -u_.row(visit - 1).head(visit - 1).transpose();
}

Matrix LdlFactors::compose() const {
    Matrix s = l_ * innovations_.asDiagonal() * l_.transpose();
    return 0.5 * (s + s.transpose());
}

bool is_positive_definite(const Matrix& m) { return sequential_pivots(m).has_value(); }

LdlFactors ldl_decompose(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) {
        throw DimensionMismatchError("covariance must be square");
    }
    auto piv = sequential_pivots(sigma);
    if (!piv) {
        throw NotPositiveDefiniteError("matrix is not positive definite");
    }
    return LdlFactors::from_unit_lower(std::move(piv->l), std::move(piv->d));
}

LdlFactors cs_factors(double h, double rho, int p) {
    check_cs_ar(h, rho, p);
    if (p > 1 && !(rho > -1.0 / (p - 1))) {
        throw InvalidModelError("CS correlation must exceed -1/(p-1)");
    }
    Matrix l = Matrix::Identity(p, p);
    for (int k = 1; k <= p; ++k) {
        const double lk = rho / (1.0 + (k - 1) * rho);
        for (int j = k + 1; j <= p; ++j) {
            l(j - 1, k - 1) = lk;
        }
    }
    Vector d(p);
    d(0) = h;
    if (p > 1) {
        d(1) = h * (1.0 - rho * rho);
    }
    for (int k = 3; k <= p; ++k) {
        const double r = rho / (1.0 + (k - 2) * rho);
        d(k - 1) = d(k - 2) * (1.0 - r * r);
    }
    return LdlFactors::from_unit_lower(std::move(l), std::move(d));
}

LdlFactors ar1_factors(double h, double rho, int p) {
    check_cs_ar(h, rho, p);
    Matrix l = Matrix::Identity(p, p);
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < j; ++k) {
            l(j, k) = std::pow(rho, j - k);
        }
    }
    Vector d = Vector::Constant(p, h * (1.0 - rho * rho));
    d(0) = h;
    return LdlFactors::from_unit_lower(std::move(l), std::move(d));
}

}  // namespace mmrm
