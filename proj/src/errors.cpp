#include "mmrm/errors.hpp"

#include <utility>

namespace mmrm {

NonMonotoneError::NonMonotoneError(std::string subject, int visit)
    : Error("subject '" + subject + "' has an observed value at visit " + std::to_string(visit) +
            " after a missing visit"),
      subject_(std::move(subject)),
      visit_(visit) {}

EmptyVisitError::EmptyVisitError(int visit)
    : Error("no subject is observed at visit " + std::to_string(visit)), visit_(visit) {}

RankDeficientError::RankDeficientError(int visit)
    : Error("design matrix for visit " + std::to_string(visit) + " is rank deficient"), visit_(visit) {}

InsufficientRowsError::InsufficientRowsError(int visit, int rows, int needed)
    : Error("visit " + std::to_string(visit) + " has " + std::to_string(rows) +
            " observed subjects; at least " + std::to_string(needed) + " required"),
      visit_(visit) {}

SingularCovariateScatterError::SingularCovariateScatterError(int visit)
    : Error("pooled within-group covariate scatter is singular at visit " + std::to_string(visit)) {}

}  // namespace mmrm
