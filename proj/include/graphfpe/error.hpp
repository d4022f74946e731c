#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace graphfpe {

enum class ErrorCode {
  InvalidArgument,
  DisconnectedGraph,
  SelfLoop,
  DuplicateEdge,
  NonpositiveWeight,
  NotAnEdge,
  GraphMismatch,
  DimensionMismatch,
  NotSymmetric,
  NonSymmetricW,
  NoConvergence,
  BoundaryDensity,
  NotZeroSum,
  NotCertifiedConvex,
  NonPositiveHessian,
  NonPositiveSymmetrizedJacobian,
  StepSizeUnderflow,
  NoValidSamples,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::NonpositiveWeight: return "NonpositiveWeight";
    case ErrorCode::NotAnEdge: return "NotAnEdge";
    case ErrorCode::GraphMismatch: return "GraphMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NonSymmetricW: return "NonSymmetricW";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BoundaryDensity: return "BoundaryDensity";
    case ErrorCode::NotZeroSum: return "NotZeroSum";
    case ErrorCode::NotCertifiedConvex: return "NotCertifiedConvex";
    case ErrorCode::NonPositiveHessian: return "NonPositiveHessian";
    case ErrorCode::NonPositiveSymmetrizedJacobian: return "NonPositiveSymmetrizedJacobian";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoValidSamples: return "NoValidSamples";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when an iterative procedure stops early; carries the last state it reached.
template <typename Partial>
class IncompleteError : public Error {
 public:
  IncompleteError(ErrorCode code, const std::string& what, Partial partial)
      : Error(code, what), partial_(std::move(partial)) {}

  const Partial& partial() const noexcept { return partial_; }

 private:
  Partial partial_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace detail
}  // namespace graphfpe
