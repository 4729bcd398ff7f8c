#pragma once

#include <stdexcept>
#include <string>

namespace rdlcqr {

enum class ErrorCode {
    InvalidInput,
    UnsupportedOrder,
    InsufficientData,
    SolverDiverged,
    SingularS,
    SingularDesign,
    DegenerateResiduals,
    NegativeAdjustedVariance,
    WeakIdentification,
    CollinearCovariates,
    DegenerateCurvature,
    QuantileInversionFailure,
    MissingColumn,
    ParseError,
    EmptyAfterFiltering,
    IoError,
};

// Stable machine-readable name, used in error JSON and exit-code mapping.
const char* error_code_name(ErrorCode code);
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace rdlcqr
