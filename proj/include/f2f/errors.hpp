#pragma once

#include <stdexcept>
#include <string>

namespace f2f {

// Exit codes used by the CLI; library errors map onto these.
enum class ExitStatus : int {
  Ok = 0,
  ConfigError = 1,
  IoError = 2,
  Divergence = 3,
  VerifyFailed = 4,
};

// Invalid configuration or usage: bad field values, incompatible settings.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension mismatch between tensors or against an op contract.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-format failures carry a distinct code per defect.
enum class FormatDefect { BadMagic, BadVersion, BadDtype, Truncated, BadHeader };

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class FormatError : public IoError {
 public:
  FormatError(FormatDefect defect, const std::string& msg)
      : IoError(msg), defect_(defect) {}
  FormatDefect defect() const { return defect_; }

 private:
  FormatDefect defect_;
};

// Non-finite loss or gradient during optimization.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace f2f
