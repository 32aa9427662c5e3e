#pragma once

#include <stdexcept>
#include <string>

namespace sweep {

enum class ErrorKind {
  InfeasiblePoint,
  SingularConfiguration,
  Dimension,
  InfeasibleControl,
  TruncationViolation,
  Stability,
  Infeasible,
  UnsupportedFamily,
  IndeterminateWitness,
  AuditFailed,
  Parse,
  Validation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InfeasiblePoint: return "infeasible_point";
    case ErrorKind::SingularConfiguration: return "singular_configuration";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::InfeasibleControl: return "infeasible_control";
    case ErrorKind::TruncationViolation: return "truncation_violation";
    case ErrorKind::Stability: return "stability";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::UnsupportedFamily: return "unsupported_family";
    case ErrorKind::IndeterminateWitness: return "indeterminate_witness";
    case ErrorKind::AuditFailed: return "audit_failed";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

// Raised by the catch-up integrator when the truncated cone cannot hold the point.
class TruncationError : public Error {
 public:
  TruncationError(int participant, double time, double required, double cap)
      : Error(ErrorKind::TruncationViolation,
              "participant " + std::to_string(participant) + " at t=" + std::to_string(time) +
                  " needs correction " + std::to_string(required) + " > cap " + std::to_string(cap)),
        participant(participant),
        time(time),
        required(required),
        cap(cap) {}

  int participant;
  double time;
  double required;
  double cap;
};

}  // namespace sweep
