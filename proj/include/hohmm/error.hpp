#pragma once

#include <stdexcept>
#include <string>

namespace hohmm {

/// Base error for everything thrown by the library. Messages are prefixed
/// with the module that raised them, e.g. "recursion: ...".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message) {}
};

/// A zero normalizing constant or a 0/0 ratio was hit while strict zero
/// handling was requested.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

}  // namespace hohmm
