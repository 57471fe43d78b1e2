#include "molaff/error.hpp"

namespace molaff {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::NonFiniteCell: return "NonFiniteCell";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::DuplicateColumn: return "DuplicateColumn";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::InsufficientRows: return "InsufficientRows";
    case ErrorKind::InsufficientLabels: return "InsufficientLabels";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case ErrorKind::UnmatchedRingClosure: return "UnmatchedRingClosure";
    case ErrorKind::UnknownSymbol: return "UnknownSymbol";
    case ErrorKind::MalformedSmiles: return "MalformedSmiles";
    case ErrorKind::SubgraphTooLarge: return "SubgraphTooLarge";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::NoLabeledNodes: return "NoLabeledNodes";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::EmptyMask: return "EmptyMask";
  }
  return "Unknown";
}

bool is_user_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch:
    case ErrorKind::EmptyMask:
      return false;
    default:
      return true;
  }
}

}  // namespace molaff
