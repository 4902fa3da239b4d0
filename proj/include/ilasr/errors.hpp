#pragma once

#include <stdexcept>
#include <string>

namespace ilasr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or model dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its contract (empty batch, duplicate id, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A configuration value violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A month stream was asked for more utterances than it holds.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Training data is malformed (e.g. an utterance carries no transcript).
class DataError : public Error {
 public:
  using Error::Error;
};

/// The ephemeral store refused access: consumed, expired or purged id.
class CustodyError : public Error {
 public:
  using Error::Error;
};

/// Something an experiment depends on is missing.
class SetupError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read, written or parsed.
class FileError : public Error {
 public:
  using Error::Error;
};

/// WERR against a zero baseline.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace ilasr
