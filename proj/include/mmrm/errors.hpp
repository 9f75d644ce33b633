#pragma once

#include <stdexcept>
#include <string>

namespace mmrm {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// core-model
class NonMonotoneError : public Error {
public:
    NonMonotoneError(std::string subject, int visit);
    const std::string& subject() const noexcept { return subject_; }
    int visit() const noexcept { return visit_; }

private:
    std::string subject_;
    int visit_;
};

class EmptyVisitError : public Error {
public:
    explicit EmptyVisitError(int visit);
    int visit() const noexcept { return visit_; }

private:
    int visit_;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class InvalidModelError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

// reml-fit
class RankDeficientError : public Error {
public:
    explicit RankDeficientError(int visit);
    int visit() const noexcept { return visit_; }

private:
    int visit_;
};

class InsufficientRowsError : public Error {
public:
    InsufficientRowsError(int visit, int rows, int needed);
    int visit() const noexcept { return visit_; }

private:
    int visit_;
};

// fixed-effect-variance
class SingularCovariateScatterError : public Error {
public:
    explicit SingularCovariateScatterError(int visit);
};

// statdist
class DomainError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    using Error::Error;
};

// design
class DegenerateDesignError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

// simulate
class SimulationFailureError : public Error {
public:
    using Error::Error;
};

// io
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace mmrm
