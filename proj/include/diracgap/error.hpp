#pragma once

#include <stdexcept>
#include <string>

namespace diracgap {

enum class ErrorKind {
  invalid_argument,
  config,
  rejected,
  integration,
  convergence,
  overflow,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double last_x)
      : Error(ErrorKind::integration, what), last_x_(last_x) {}
  double last_x() const { return last_x_; }

 private:
  double last_x_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace diracgap
