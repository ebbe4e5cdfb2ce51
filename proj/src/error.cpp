#include "sli/error.hpp"

namespace sli {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Evaluation: return "EvaluationError";
    case ErrorKind::Index: return "IndexError";
    case ErrorKind::HormanderFailure: return "HormanderFailure";
    case ErrorKind::IrregularPoint: return "IrregularPoint";
    case ErrorKind::SingularFrame: return "SingularFrame";
    case ErrorKind::MeshMismatch: return "MeshMismatch";
    case ErrorKind::Covariance: return "CovarianceFactorizationFailure";
    case ErrorKind::BlowUp: return "BlowUp";
    case ErrorKind::NoValidLambda: return "NoValidLambda";
    case ErrorKind::AmbiguousRoute: return "AmbiguousRoute";
    case ErrorKind::IndependenceFailure: return "IndependenceFailure";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateCube: return "DegenerateCube";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace sli
