#pragma once

#include <stdexcept>
#include <string>

namespace latentalpha {

enum class ErrorKind {
  InvalidArgument,
  DegenerateFilter,
  SingularHorizon,
  DataFormat,
  ImpossibleObservation,
  SimulationDiverged,
  StepSize,
  UndefinedBaseline,
  Config,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::DegenerateFilter: return "degenerate filter";
    case ErrorKind::SingularHorizon: return "singular horizon";
    case ErrorKind::DataFormat: return "data format";
    case ErrorKind::ImpossibleObservation: return "impossible observation";
    case ErrorKind::SimulationDiverged: return "simulation diverged";
    case ErrorKind::StepSize: return "step size";
    case ErrorKind::UndefinedBaseline: return "undefined baseline";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "error";
}

}  // namespace latentalpha
