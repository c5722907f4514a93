#pragma once

#include <stdexcept>
#include <string>

namespace policylearn {

// Bad inputs: configs, shapes, preconditions. CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures discovered mid-computation. CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class NotPositiveDefinite : public NumericError {
 public:
  explicit NotPositiveDefinite(const std::string& msg) : NumericError(msg) {}
};

class RankDeficient : public NumericError {
 public:
  explicit RankDeficient(const std::string& msg) : NumericError(msg) {}
};

class EmptyGroup : public NumericError {
 public:
  explicit EmptyGroup(const std::string& msg) : NumericError(msg) {}
};

}  // namespace policylearn
