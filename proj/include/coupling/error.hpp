#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coupling {

enum class ErrorCode {
  ZeroMarginal,
  DimensionMismatch,
  MarginalMismatch,
  InvalidOrder,
  EpsilonTooLarge,
  NonFinite,
  DegenerateCluster,
  RankDeficient,
  UnknownLabel,
  LabelMismatch,
  ParseError,
  EmptyAfterPruning,
  InvalidRating,
  InvalidParams,
  ShapeMismatch,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MarginalMismatch: return "MarginalMismatch";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::EpsilonTooLarge: return "EpsilonTooLarge";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DegenerateCluster: return "DegenerateCluster";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAfterPruning: return "EmptyAfterPruning";
    case ErrorCode::InvalidRating: return "InvalidRating";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Input file could not be parsed; `line` is 1-based, `offset` is the byte
/// offset of the start of that line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t offset, const std::string& what)
      : Error(ErrorCode::ParseError,
              "line " + std::to_string(line) + " (byte " + std::to_string(offset) + "): " + what),
        line_(line),
        offset_(offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace coupling
