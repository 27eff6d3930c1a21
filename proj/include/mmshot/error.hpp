#pragma once

#include <stdexcept>
#include <string>

namespace mmshot {

enum class ErrorKind {
  kInvalidArgument,
  kFormat,
  kDimensionMismatch,
  kDuplicateId,
  kUnknownGenre,
  kIo,
  kShapeMismatch,
  kEmptyInput,
  kDegenerateSplit,
  kDivergence,
};

// Every fault raised by the library carries a kind so callers (the CLI in
// particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace mmshot
