#include "mmseq/errors.hpp"

namespace mmseq {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidInput:
      return "invalid-input";
    case ErrorKind::kDomain:
      return "domain";
    case ErrorKind::kNumericalDegeneracy:
      return "numerical-degeneracy";
    case ErrorKind::kConvergence:
      return "convergence";
    case ErrorKind::kLinearAlgebra:
      return "linear-algebra";
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kConstruction:
      return "construction";
  }
  return "unknown";
}

}  // namespace mmseq
