#pragma once

#include <stdexcept>
#include <string>

namespace o2cap {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or cross-field inconsistencies.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message names the offending byte or line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Mismatched matrix or vector dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation parameters outside their legal range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Label values outside their legal range (e.g. a camera not in [1, C]).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Every instance was discarded as an outlier.
class EmptyTrainingSetError : public Error {
 public:
  using Error::Error;
};

/// A memory slot could not be initialized (no members, or a zero mean).
class InitializationError : public Error {
 public:
  using Error::Error;
};

/// A loss was asked to evaluate a degenerate softmax or violated its contract.
class LossError : public Error {
 public:
  using Error::Error;
};

}  // namespace o2cap
