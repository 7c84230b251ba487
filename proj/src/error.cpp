#include "neuroscope/error.hpp"

namespace neuroscope {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::InconsistentShape: return "InconsistentShape";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::PrecisionOverflow: return "PrecisionOverflow";
    case ErrorKind::AlignmentFailure: return "AlignmentFailure";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidPattern: return "InvalidPattern";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::StructureMismatch: return "StructureMismatch";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::DegenerateConcept: return "DegenerateConcept";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::MismatchedNeuronSets: return "MismatchedNeuronSets";
    case ErrorKind::OutOfRangeNeuron: return "OutOfRangeNeuron";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& message, const std::string& locator) {
  std::string out(to_string(kind));
  out += ": ";
  out += message;
  if (!locator.empty()) {
    out += " (at ";
    out += locator;
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string locator)
    : std::runtime_error(compose(kind, message, locator)), kind_(kind), message_(message), locator_(std::move(locator)) {}

}  // namespace neuroscope
