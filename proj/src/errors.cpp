#include "tofmap/errors.hpp"

#include <utility>

namespace tofmap {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Alignment: return "alignment";
        case ErrorKind::MissingBand: return "missing_band";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::DegenerateInput: return "degenerate_input";
        case ErrorKind::DegenerateGeometry: return "degenerate_geometry";
        case ErrorKind::Data: return "data";
        case ErrorKind::ConstraintInfeasible: return "constraint_infeasible";
        case ErrorKind::Bounds: return "bounds";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::IncompleteCoverage: return "incomplete_coverage";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
        case ErrorKind::Stage: return "stage";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

ConstraintInfeasibleError::ConstraintInfeasibleError(const std::string& message,
                                                     double best_deviation_pp)
    : Error(ErrorKind::ConstraintInfeasible, message), best_deviation_pp_(best_deviation_pp) {}

IncompleteCoverageError::IncompleteCoverageError(std::size_t uncovered_pixels)
    : Error(ErrorKind::IncompleteCoverage,
            std::to_string(uncovered_pixels) + " pixel(s) not covered by any window"),
      uncovered_(uncovered_pixels) {}

StageError::StageError(std::string stage, ErrorKind cause, const std::string& message,
                       std::vector<std::string> completed_artifacts)
    : Error(ErrorKind::Stage, "stage '" + stage + "' failed: " + message),
      stage_(std::move(stage)),
      cause_(cause),
      artifacts_(std::move(completed_artifacts)) {}

}  // namespace tofmap
