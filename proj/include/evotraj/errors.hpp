#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace evotraj {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user or programmatic configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or sequence shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced inside a kernel.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Optimizer or model used before it was initialised.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (unwritable directory, missing input).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A persisted artifact is malformed. `file()` names the offending file.
class FormatError : public Error {
 public:
  FormatError(const std::filesystem::path& file, const std::string& what)
      : Error(file.string() + ": " + what), file_(file) {}
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
};

/// A persisted artifact written by an unknown (newer) format version.
class FormatVersionError : public FormatError {
 public:
  FormatVersionError(const std::filesystem::path& file, int found, int supported)
      : FormatError(file, "unsupported format_version " + std::to_string(found) +
                              " (this build reads version " + std::to_string(supported) + ")"),
        found_(found) {}
  int found() const { return found_; }

 private:
  int found_;
};

}  // namespace evotraj
