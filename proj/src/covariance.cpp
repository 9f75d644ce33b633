#include "mmrm/covariance.hpp"

#include "mmrm/errors.hpp"
#include "mmrm/ldl.hpp"

#include <cmath>

namespace mmrm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_h_rho(double h, double rho, const char* name) {
    if (!(h > 0.0)) {
        throw InvalidModelError(std::string(name) + " variance must be positive");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw InvalidModelError(std::string(name) + " correlation must lie in (-1, 1)");
    }
}

}  // namespace

CovarianceModel CovarianceModel::unstructured(Matrix sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw DimensionMismatchError("unstructured covariance must be a non-empty square matrix");
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-12)) {
        throw InvalidModelError("unstructured covariance is not symmetric");
    }
    if (!is_positive_definite(sigma)) {
        throw NotPositiveDefiniteError("unstructured covariance is not positive definite");
    }
    return CovarianceModel(Unstructured{std::move(sigma)});
}

CovarianceModel CovarianceModel::compound_symmetry(double h, double rho) {
    check_h_rho(h, rho, "CS");
    return CovarianceModel(CompoundSymmetry{h, rho});
}

CovarianceModel CovarianceModel::ar1(double h, double rho) {
    check_h_rho(h, rho, "AR(1)");
    return CovarianceModel(Ar1{h, rho});
}

CovarianceModel CovarianceModel::toeplitz(Vector first_row) {
    if (first_row.size() == 0 || !(first_row(0) > 0.0)) {
        throw InvalidModelError("Toeplitz first row must start with a positive variance");
    }
    return CovarianceModel(Toeplitz{std::move(first_row)});
}

std::string CovarianceModel::type_name() const {
    return std::visit(Overloaded{[](const Unstructured&) { return std::string("unstructured"); },
                                 [](const CompoundSymmetry&) { return std::string("cs"); },
                                 [](const Ar1&) { return std::string("ar1"); },
                                 [](const Toeplitz&) { return std::string("toeplitz"); }},
                      value_);
}

Matrix materialize_covariance(const CovarianceModel& model, int p) {
    if (p < 1) {
        throw DimensionMismatchError("visit count must be positive");
    }
    Matrix out = std::visit(
        Overloaded{
            [p](const Unstructured& u) -> Matrix {
                if (u.sigma.rows() != p) {
                    throw DimensionMismatchError("unstructured covariance is " + std::to_string(u.sigma.rows()) +
                                                 "x" + std::to_string(u.sigma.rows()) + ", expected p = " +
                                                 std::to_string(p));
                }
                return u.sigma;
            },
            [p](const CompoundSymmetry& cs) -> Matrix {
                if (p > 1 && !(cs.rho > -1.0 / (p - 1))) {
                    throw InvalidModelError("CS correlation must exceed -1/(p-1)");
                }
                Matrix m = Matrix::Constant(p, p, cs.h * cs.rho);
                m.diagonal().setConstant(cs.h);
                return m;
            },
            [p](const Ar1& ar) -> Matrix {
                Matrix m(p, p);
                for (int j = 0; j < p; ++j) {
                    for (int k = 0; k < p; ++k) {
                        m(j, k) = ar.h * std::pow(ar.rho, std::abs(j - k));
                    }
                }
                return m;
            },
            [p](const Toeplitz& t) -> Matrix {
                if (t.first_row.size() != p) {
                    throw DimensionMismatchError("Toeplitz first row has length " +
                                                 std::to_string(t.first_row.size()) + ", expected p = " +
                                                 std::to_string(p));
                }
                Matrix m(p, p);
                for (int j = 0; j < p; ++j) {
                    for (int k = 0; k < p; ++k) {
                        m(j, k) = t.first_row(std::abs(j - k));
                    }
                }
                return m;
            }},
        model.value());
    if (!is_positive_definite(out)) {
        throw NotPositiveDefiniteError(model.type_name() + " covariance is not positive definite for p = " +
                                       std::to_string(p));
    }
    return out;
}

}  // namespace mmrm
