#pragma once

#include <stdexcept>
#include <string>

namespace clb {

// Input that cannot be parsed (corpus files, diffs, config files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a contract (dangling ids, bad ranges).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures from the outside world: git, the filesystem, numerics.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clb
