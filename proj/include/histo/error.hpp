#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histo {

enum class ErrorCode {
  // pyramid
  MissingLevelFile,
  DimensionMismatch,
  NonMonotonicDownsample,
  LevelOutOfRange,
  // segment
  EmptyImage,
  DegenerateHistogram,
  // tile
  RectOutOfBounds,
  DimMismatch,
  // stain
  InsufficientTissue,
  EmptyInput,
  // features
  TooFewSamples,
  KTooLarge,
  DegenerateData,
  // learn
  NonFiniteLoss,
  SingleClassInput,
  StageDimMismatch,
  // eval
  EmptyClass,
  KOutOfRange,
  LengthMismatch,
  UndefinedMetric,
  // cli / io
  ConfigInvalid,
  CorpusEmpty,
  MissingInput,
  InvalidArgument,
  IoError,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can dispatch on the kind instead of the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace histo
