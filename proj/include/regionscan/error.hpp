#pragma once

#include <stdexcept>
#include <string>

namespace regionscan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed JSON text.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Well-formed JSON that violates the snapshot schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// The entry function has no basic blocks.
class EmptyCfgError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed string score table.
class OverrideFormatError : public Error {
 public:
  using Error::Error;
};

/// The binary exceeds the function budget for call-path enumeration.
class FunctionLimitError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

/// Feature, label, model or config file that cannot be used.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace regionscan
