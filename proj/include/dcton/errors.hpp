#pragma once

#include <stdexcept>
#include <string>

namespace dcton {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Linear system has no unique solution (collinear control points, rank-deficient T).
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file contents: bad magic, truncated payload, version mismatch.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dcton
