#pragma once

#include <stdexcept>
#include <string>

namespace securefix {

/// Requested line span lies outside the file.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A segment no longer matches the file content it was extracted from.
class StaleSegmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Source file could not be read or is not UTF-8.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ciphertext failed authentication (wrong key or tampered bytes).
class AuthenticationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest and corpus disagree.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace securefix
