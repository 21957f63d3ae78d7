#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unweave {

enum class ErrorKind {
  MalformedDocument,
  InvariantViolation,
  CableNotVisible,
  TraceBroke,
  TraceRunaway,
  CableTooShort,
  EmptyWindow,
  OrphanUndercrossing,
  CableTooShortToPivot,
  InvalidGraspNode,
  ThetaOutOfBounds,
  NoCandidateActions,
  Deadlock,
  GenerationBudgetExceeded,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedDocument: return "malformed document";
    case ErrorKind::InvariantViolation: return "invariant violation";
    case ErrorKind::CableNotVisible: return "cable not visible";
    case ErrorKind::TraceBroke: return "trace broke";
    case ErrorKind::TraceRunaway: return "trace runaway";
    case ErrorKind::CableTooShort: return "cable too short";
    case ErrorKind::EmptyWindow: return "empty window";
    case ErrorKind::OrphanUndercrossing: return "orphan undercrossing";
    case ErrorKind::CableTooShortToPivot: return "cable too short to pivot";
    case ErrorKind::InvalidGraspNode: return "invalid grasp node";
    case ErrorKind::ThetaOutOfBounds: return "theta out of bounds";
    case ErrorKind::NoCandidateActions: return "no candidate actions";
    case ErrorKind::Deadlock: return "deadlock";
    case ErrorKind::GenerationBudgetExceeded: return "generation budget exceeded";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-checkable kind; the
// message always starts with the kind's text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view detail = {})
      : std::runtime_error(compose(kind, detail)), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  static std::string compose(ErrorKind kind, std::string_view detail) {
    std::string msg(to_string(kind));
    if (!detail.empty()) {
      msg += ": ";
      msg += detail;
    }
    return msg;
  }

  ErrorKind kind_;
};

}  // namespace unweave
