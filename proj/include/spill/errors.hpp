#pragma once

#include <stdexcept>
#include <string>

namespace spill {

// Error taxonomy shared by all modules. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 1.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input content (bad JSON line, bad binary header, ...).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid input that violates a data invariant (duplicate id,
// zero-norm embedding row, id that does not resolve).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// A measure that cannot be evaluated (empty pool, too few points). Callers
// decide whether to skip the row or abort.
struct UndefinedMeasureError : std::runtime_error {
  explicit UndefinedMeasureError(const std::string& msg)
      : std::runtime_error(msg) {}
};

struct CollinearityError : std::runtime_error {
  explicit CollinearityError(const std::string& msg)
      : std::runtime_error(msg) {}
};

struct InferenceError : std::runtime_error {
  explicit InferenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spill
