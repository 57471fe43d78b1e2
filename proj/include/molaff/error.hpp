#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace molaff {

enum class ErrorKind {
  // Input and configuration problems; the CLI reports these with exit code 2.
  MissingFile,
  MalformedCsv,
  NonNumericCell,
  EmptyCell,
  NonFiniteCell,
  DuplicateId,
  DuplicateColumn,
  MissingColumn,
  InsufficientRows,
  InsufficientLabels,
  InvalidArgument,
  InvalidConfig,
  MissingArtifact,
  UnsupportedVersion,
  // SMILES
  UnbalancedParenthesis,
  UnmatchedRingClosure,
  UnknownSymbol,
  MalformedSmiles,
  SubgraphTooLarge,
  // Numerics
  ZeroVector,
  NoLabeledNodes,
  ShapeMismatch,
  SingularSystem,
  ZeroVariance,
  EmptyMask,
};

std::string_view to_string(ErrorKind kind);

/// True for error kinds caused by user input rather than a program defect.
bool is_user_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace molaff
