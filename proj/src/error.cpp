#include "histo/error.hpp"

namespace histo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingLevelFile: return "MissingLevelFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonMonotonicDownsample: return "NonMonotonicDownsample";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::DegenerateHistogram: return "DegenerateHistogram";
    case ErrorCode::RectOutOfBounds: return "RectOutOfBounds";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InsufficientTissue: return "InsufficientTissue";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::StageDimMismatch: return "StageDimMismatch";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::CorpusEmpty: return "CorpusEmpty";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace histo
