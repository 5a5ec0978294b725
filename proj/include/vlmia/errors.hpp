// errors.hpp
//
// Error taxonomy shared by the library and the CLI. Each category carries
// the process exit code the CLI maps it to (0 success, 2 config, 3 data,
// 4 numeric divergence).

#pragma once

#include <stdexcept>
#include <string>

namespace vlmia {

class Error : public std::runtime_error {
public:
  Error(int exit_code, const std::string& msg)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

private:
  int exit_code_;
};

// Bad or inconsistent configuration (unknown metric, granularity larger
// than a class, unresolvable path, malformed config file).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(2, msg) {}
};

// Bad data at runtime: parse failures, duplicate keys, missing embeddings,
// degenerate score classes, shape mismatches.
class DataError : public Error {
public:
  explicit DataError(const std::string& msg) : Error(3, msg) {}
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  explicit DivergenceError(const std::string& msg) : Error(4, msg) {}
};

}  // namespace vlmia
