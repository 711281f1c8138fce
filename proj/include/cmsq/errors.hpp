#pragma once

#include <stdexcept>
#include <string>

namespace cmsq {

// Base for every error the library raises. The CLI maps subclasses onto
// process exit codes (usage 1, data/format 2, numerical 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input files, inconsistent artifacts, bad checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// Divergence (non-finite loss or gradient).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmsq
