// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace splatlidar {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  kUsage,       // bad arguments, malformed pose/config
  kFormat,      // missing property, unsupported or corrupt file
  kParse,       // malformed header (message carries a byte offset)
  kEmptyAsset,  // zero vertices / empty cloud
  kBuild,       // invalid input to a structure build
  kDegenerate,  // volume without a boundary, kernel wider than grid
  kValidation,  // domain-type invariant violated
  kResource,    // cell budget exceeded
  kIo,          // cannot open / write a file
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// 0 success, 1 usage, 2 data/format, 3 resource.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kValidation:
      return 1;
    case ErrorKind::kResource:
      return 3;
    default:
      return 2;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace splatlidar
