#include "rdlcqr/errors.hpp"

namespace rdlcqr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::SingularS: return "SingularS";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::DegenerateResiduals: return "DegenerateResiduals";
    case ErrorCode::NegativeAdjustedVariance: return "NegativeAdjustedVariance";
    case ErrorCode::WeakIdentification: return "WeakIdentification";
    case ErrorCode::CollinearCovariates: return "CollinearCovariates";
    case ErrorCode::DegenerateCurvature: return "DegenerateCurvature";
    case ErrorCode::QuantileInversionFailure: return "QuantileInversionFailure";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

int error_exit_code(ErrorCode code) {
    // 1 is reserved for CLI usage errors.
    return 10 + static_cast<int>(code);
}

} // namespace rdlcqr
