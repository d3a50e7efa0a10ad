#pragma once

#include <stdexcept>

namespace gazeattn {

// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitIo = 2,
  kExitNumeric = 3,
  kExitVersion = 4,
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gazeattn
