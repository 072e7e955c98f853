#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace homog {

// Library-wide error type. `kind` maps to CLI exit codes: config errors
// exit with 2, numerical failures with 3.
class Error : public std::runtime_error {
 public:
  enum class Kind { config, numeric };

  Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

[[noreturn]] inline void config_error(const std::string& msg) {
  throw Error(Error::Kind::config, msg);
}

[[noreturn]] inline void numeric_error(const std::string& msg) {
  throw Error(Error::Kind::numeric, msg);
}

// Deterministic float formatting for all text outputs.
inline std::string fmt_g(double v, int digits = 12) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace homog
