#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neuroscope {

/// Failure categories surfaced by the library. The CLI maps every kind
/// except InvalidArgument to the "data error" exit code.
enum class ErrorKind {
  MalformedFile,
  InconsistentShape,
  NonFiniteValue,
  IoFailure,
  PrecisionOverflow,
  AlignmentFailure,
  LengthMismatch,
  InvalidPattern,
  EmptyCorpus,
  StructureMismatch,
  ClassTooSmall,
  UnknownLabel,
  Diverged,
  DegenerateConcept,
  SingularCovariance,
  MismatchedNeuronSets,
  OutOfRangeNeuron,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string locator = {});

  ErrorKind kind() const noexcept { return kind_; }

  /// Where in the input the problem was found ("line 7", "dataset '3'"),
  /// empty when not applicable.
  const std::string& locator() const noexcept { return locator_; }

  /// The message without kind prefix or locator.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::string locator_;
};

}  // namespace neuroscope
