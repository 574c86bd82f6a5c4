#pragma once

#include <stdexcept>
#include <string>

namespace carmi {

/// Base for every error raised by the library. Callers that only care about
/// "something in the pipeline failed" catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllegalActionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace carmi
