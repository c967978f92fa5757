#pragma once

#include <stdexcept>
#include <string>

namespace mrag {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad input, empty list, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A remote service answered with something that does not match the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A remote service could not be reached, or kept failing after all retries.
class ServiceError : public Error {
 public:
  using Error::Error;
};

/// Config file or record schema violation; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrag
