#pragma once

#include <stdexcept>
#include <string>

namespace clap {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

// Error taxonomy mirrors the process exit contract:
// config errors exit 2, data errors 3, numeric aborts 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace clap
