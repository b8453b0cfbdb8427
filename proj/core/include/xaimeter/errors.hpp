#pragma once

#include <stdexcept>
#include <string>

namespace xaimeter {

/// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class ValueError : public Error {
public:
    using Error::Error;
};

/// Tensor or image shapes do not match the operation's contract.
class ShapeError : public ValueError {
public:
    using ValueError::ValueError;
};

/// Correlation requested on constant input. Raised instead of returning a
/// sentinel so callers have to decide how to report the undefined value.
class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

/// A bounded-retry loop (sample redraw, seed-noise regeneration) gave up.
class RetryBudgetError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or parameter.
class TrainingDivergedError : public Error {
public:
    using Error::Error;
};

/// File-level I/O problem.
class IoError : public Error {
public:
    using Error::Error;
};

/// File exists but its contents are not what the format promises.
class CorruptFileError : public IoError {
public:
    using IoError::IoError;
};

/// On-disk format version is not the one this build reads.
class VersionMismatchError : public IoError {
public:
    using IoError::IoError;
};

/// Structured data fails schema or integrity checks (manifest fields,
/// result-table schema, model checksum refusals).
class SchemaError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace xaimeter
