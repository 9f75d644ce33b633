#pragma once

#include "mmrm/dataset.hpp"

#include <string>
#include <variant>

namespace mmrm {

struct Unstructured {
    Matrix sigma;
};

/// Sigma_jk = h * rho for j != k, h on the diagonal.
struct CompoundSymmetry {
    double h;
    double rho;
};

/// Sigma_jk = h * rho^|j-k|.
struct Ar1 {
    double h;
    double rho;
};

/// Sigma_jk = first_row(|j-k|).
struct Toeplitz {
    Vector first_row;
};

/// Within-subject covariance of the post-baseline outcomes.
///
/// Construct through the named factories; they validate parameters that do
/// not depend on the visit count.
class CovarianceModel {
public:
    using Variant = std::variant<Unstructured, CompoundSymmetry, Ar1, Toeplitz>;

    static CovarianceModel unstructured(Matrix sigma);
    static CovarianceModel compound_symmetry(double h, double rho);
    static CovarianceModel ar1(double h, double rho);
    static CovarianceModel toeplitz(Vector first_row);

    const Variant& value() const noexcept { return value_; }
    /// "unstructured", "cs", "ar1" or "toeplitz".
    std::string type_name() const;

private:
    explicit CovarianceModel(Variant v) : value_(std::move(v)) {}
    Variant value_;
};

/// Dense p x p matrix of the model. Throws NotPositiveDefiniteError,
/// InvalidModelError (CS with rho <= -1/(p-1)) or DimensionMismatchError.
Matrix materialize_covariance(const CovarianceModel& model, int p);

}  // namespace mmrm
