#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qgraphino {

enum class ErrorCode {
  ZeroVector,
  TooManyFeatures,
  QubitOutOfRange,
  ControlEqualsTarget,
  InvalidRange,
  InvalidSpec,
  ParamLengthMismatch,
  QubitCountMismatch,
  ShapeMismatch,
  MissingCache,
  EmptyDataset,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  ShapeInconsistent,
  NonFinite,
  RegionNotCovered,
  OverlappingRanges,
  DegenerateSeries,
  LengthMismatch,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::TooManyFeatures: return "TooManyFeatures";
    case ErrorCode::QubitOutOfRange: return "QubitOutOfRange";
    case ErrorCode::ControlEqualsTarget: return "ControlEqualsTarget";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParamLengthMismatch: return "ParamLengthMismatch";
    case ErrorCode::QubitCountMismatch: return "QubitCountMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingCache: return "MissingCache";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::ShapeInconsistent: return "ShapeInconsistent";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RegionNotCovered: return "RegionNotCovered";
    case ErrorCode::OverlappingRanges: return "OverlappingRanges";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {
[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }
}  // namespace detail

}  // namespace qgraphino
