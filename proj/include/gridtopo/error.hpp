#pragma once

#include <stdexcept>
#include <string>

namespace gridtopo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file lacks a required column or has a malformed layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Values fail validation: duplicate ids, out-of-range numbers, inconsistent rows.
class DataError : public Error {
 public:
  using Error::Error;
};

// A structural precondition between objects is broken (mismatched premise sets,
// more clusters than points, coincident centroids).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Configuration values out of their documented ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The operation cannot produce an answer for this input (no evidence available).
class UnresolvableError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure talking to an external service; callers may retry.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridtopo
