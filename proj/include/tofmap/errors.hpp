#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tofmap {

enum class ErrorKind {
    Parameter,
    Alignment,
    MissingBand,
    Shape,
    DegenerateInput,
    DegenerateGeometry,
    Data,
    ConstraintInfeasible,
    Bounds,
    Validation,
    IncompleteCoverage,
    EmptyInput,
    Config,
    Io,
    Stage,
};

/// Stable machine-readable name, used in the CLI's error JSON.
const char* to_string(ErrorKind kind) noexcept;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
public:
    explicit KindError(const std::string& message) : Error(K, message) {}
};

using ParameterError = KindError<ErrorKind::Parameter>;
using AlignmentError = KindError<ErrorKind::Alignment>;
using MissingBandError = KindError<ErrorKind::MissingBand>;
using ShapeError = KindError<ErrorKind::Shape>;
using DegenerateInputError = KindError<ErrorKind::DegenerateInput>;
using DegenerateGeometryError = KindError<ErrorKind::DegenerateGeometry>;
using DataError = KindError<ErrorKind::Data>;
using BoundsError = KindError<ErrorKind::Bounds>;
using ValidationError = KindError<ErrorKind::Validation>;
using EmptyInputError = KindError<ErrorKind::EmptyInput>;
using ConfigError = KindError<ErrorKind::Config>;
using IoError = KindError<ErrorKind::Io>;

class ConstraintInfeasibleError : public Error {
public:
    ConstraintInfeasibleError(const std::string& message, double best_deviation_pp);
    /// Smallest max-per-class deviation (percentage points) seen during the search.
    double best_deviation_pp() const noexcept { return best_deviation_pp_; }

private:
    double best_deviation_pp_;
};

class IncompleteCoverageError : public Error {
public:
    explicit IncompleteCoverageError(std::size_t uncovered_pixels);
    std::size_t uncovered_pixels() const noexcept { return uncovered_; }

private:
    std::size_t uncovered_;
};

/// Wraps a failure inside a pipeline stage. Artifacts written by earlier
/// stages stay on disk and are listed here.
class StageError : public Error {
public:
    StageError(std::string stage, ErrorKind cause, const std::string& message,
               std::vector<std::string> completed_artifacts);
    const std::string& stage() const noexcept { return stage_; }
    ErrorKind cause() const noexcept { return cause_; }
    const std::vector<std::string>& completed_artifacts() const noexcept { return artifacts_; }

private:
    std::string stage_;
    ErrorKind cause_;
    std::vector<std::string> artifacts_;
};

}  // namespace tofmap
