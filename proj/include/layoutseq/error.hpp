#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace layoutseq {

enum class ErrorKind {
  InvalidInput,
  EmptyLayout,
  Capacity,
  Parse,
  InvalidConstraint,
  State,
  Grammar,
  Shape,
  InvalidUse,
  Io,
  EmptyDataset,
  Training,
  Config,
  UnknownCategory,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse errors carry the offending token position.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : Error(ErrorKind::Parse, "at token " + std::to_string(position) + ": " + message),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace layoutseq
