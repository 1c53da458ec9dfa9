#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mess {

enum class ErrorCode {
  MissingFile,
  BadMagic,
  DimMismatch,
  NonFiniteValue,
  InvalidSoftmax,
  OutOfRangeClass,
  ParseError,
  MissingReferencedFile,
  InconsistentExitSet,
  NonPositiveCost,
  MissingLatency,
  TooManyExits,
  DuplicatePlacement,
  DegenerateClassCount,
  EmptyMatrix,
  EmptySelection,
  InvalidArgument,
  EmptySpace,
  MissingExitRates,
  ConfigSettingMismatch,
  UnknownArch,
  UnknownThreshold,
  ManifestMismatch,
  BadLadder,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidSoftmax: return "InvalidSoftmax";
    case ErrorCode::OutOfRangeClass: return "OutOfRangeClass";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingReferencedFile: return "MissingReferencedFile";
    case ErrorCode::InconsistentExitSet: return "InconsistentExitSet";
    case ErrorCode::NonPositiveCost: return "NonPositiveCost";
    case ErrorCode::MissingLatency: return "MissingLatency";
    case ErrorCode::TooManyExits: return "TooManyExits";
    case ErrorCode::DuplicatePlacement: return "DuplicatePlacement";
    case ErrorCode::DegenerateClassCount: return "DegenerateClassCount";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::MissingExitRates: return "MissingExitRates";
    case ErrorCode::ConfigSettingMismatch: return "ConfigSettingMismatch";
    case ErrorCode::UnknownArch: return "UnknownArch";
    case ErrorCode::UnknownThreshold: return "UnknownThreshold";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::BadLadder: return "BadLadder";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception. `paths` carries
/// the offending files for errors that concern several of them at once.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> paths = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        paths_(std::move(paths)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& paths() const noexcept { return paths_; }

 private:
  ErrorCode code_;
  std::vector<std::string> paths_;
};

}  // namespace mess
