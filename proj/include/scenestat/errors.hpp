#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scenestat {

// Malformed input data. Carries the file and (1-based) line when known.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& message, std::string file = {},
              std::size_t line = 0, std::string field = {});

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

// A persisted artifact failed to verify.
class PersistError : public std::runtime_error {
 public:
  enum class Kind { kVersionMismatch, kChecksumMismatch, kWrongKind };

  PersistError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// A library invariant was found broken at runtime.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace scenestat
