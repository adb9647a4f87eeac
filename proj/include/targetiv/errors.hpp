#pragma once

#include <stdexcept>
#include <string>

namespace targetiv {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

class WeakIdentification : public Error {
 public:
  WeakIdentification(const std::string& estimand, const std::string& msg)
      : Error(msg), estimand_(estimand) {}
  const std::string& estimand() const { return estimand_; }

 private:
  std::string estimand_;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class DesignViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace targetiv
