#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sli {

enum class ErrorKind {
  Parse,
  Evaluation,
  Index,
  HormanderFailure,
  IrregularPoint,
  SingularFrame,
  MeshMismatch,
  Covariance,
  BlowUp,
  NoValidLambda,
  AmbiguousRoute,
  IndependenceFailure,
  InsufficientSamples,
  DegenerateCube,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::Parse, what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace sli
