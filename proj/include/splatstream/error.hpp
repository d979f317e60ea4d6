#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace splatstream {

enum class ErrorKind {
  // model parsing and registry
  MalformedHeader,
  MissingProperty,
  TruncatedBody,
  NonFiniteAttribute,
  RootNotFound,
  UnknownModel,
  LoadFailed,
  UnderflowRelease,
  // rendering and codecs
  EncodeFailure,
  DecodeFailure,
  // harness
  ParseError,
  NonMonotonicTime,
  ServerUnreachable,
  IoError,
  // metrics
  DimensionMismatch,
  TooSmall,
  IndexOutOfRange,
  EmptyInput,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::MissingProperty: return "MissingProperty";
    case ErrorKind::TruncatedBody: return "TruncatedBody";
    case ErrorKind::NonFiniteAttribute: return "NonFiniteAttribute";
    case ErrorKind::RootNotFound: return "RootNotFound";
    case ErrorKind::UnknownModel: return "UnknownModel";
    case ErrorKind::LoadFailed: return "LoadFailed";
    case ErrorKind::UnderflowRelease: return "UnderflowRelease";
    case ErrorKind::EncodeFailure: return "EncodeFailure";
    case ErrorKind::DecodeFailure: return "DecodeFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorKind::ServerUnreachable: return "ServerUnreachable";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// All library failures are reported through this one exception type; the
// kind is what callers branch on, the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace splatstream
