#pragma once

#include <stdexcept>
#include <string>

namespace hfu {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid aggregation scheme (non-divisor levels, missing top/bottom, ...).
class InvalidSchemeError : public Error {
public:
    using Error::Error;
};

/// Requested aggregation level is not part of the scheme.
class InvalidLevelError : public Error {
public:
    using Error::Error;
};

/// Not enough data for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// A stacked period could not be assembled from the per-level series.
class IncompletePeriodError : public Error {
public:
    using Error::Error;
};

/// Required observed values are missing.
class MissingDataError : public Error {
public:
    using Error::Error;
};

/// The scheme cannot be represented as a single tree.
class UnsupportedTreeError : public Error {
public:
    using Error::Error;
};

/// Vector/matrix dimensions do not match.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Inputs disagree with each other (e.g. level histories imply different z).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Model estimation failed (non-convergence, degenerate input).
class FitFailureError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix is numerically singular and no fallback was requested.
class SingularCovarianceError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input files.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Invalid command-line or configuration input.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace hfu
