#pragma once

#include <stdexcept>
#include <string>

namespace sketchedit {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raster, tensor or list sizes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, undecodable or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint archives that are missing, corrupt or of the wrong version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A training loss became NaN or infinite.
class NonFiniteLossError : public Error {
 public:
  using Error::Error;
};

}  // namespace sketchedit
