#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fgtrac {

enum class ErrorCode {
  EmptySecret,
  InvalidEvent,
  ParseError,
  SequenceGap,
  StorageFailure,
  RangeOverlap,
  RangeOutOfBounds,
  EmptyLeafSet,
  IndexOutOfRange,
  UnknownBatch,
  InvalidConfig,
  InvalidRatios,
  EmptySplit,
  DimensionMismatch,
  EmptyCheckpointSet,
  MissingRoleEvent,
  TargetNotFound,
  RunExists,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library are reported as Error; callers
// dispatch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fgtrac
