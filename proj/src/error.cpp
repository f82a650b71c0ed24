#include "keyhole/error.hpp"

namespace keyhole {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Query: return "query";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Unparseable: return "unparseable";
    case ErrorCode::NeedsSelection: return "needs-selection";
    case ErrorCode::Range: return "range";
    case ErrorCode::InvalidDimensionality: return "invalid-dimensionality";
    case ErrorCode::InvalidTarget: return "invalid-target";
    case ErrorCode::Corruption: return "corruption";
    case ErrorCode::Version: return "version";
  }
  return "unknown";
}

int exit_code(ErrorCode code) noexcept {
  return code == ErrorCode::Corruption ? 2 : 1;
}

}  // namespace keyhole
