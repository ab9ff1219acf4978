#pragma once

#include <stdexcept>
#include <string>

namespace kdaudit {

// Input data failed a structural or consistency check (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure while processing otherwise well-formed data (CLI exit code 3).
class AuditError : public std::runtime_error {
public:
  explicit AuditError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kdaudit
