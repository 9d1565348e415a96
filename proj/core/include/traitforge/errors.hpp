#pragma once

#include <stdexcept>

namespace traitforge {

// Validation or analysis failure (bad bank, unbalanced dataset, constant
// column, singular scatter...). The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad usage or IO failure (missing file, unwritable path, malformed flag
// combination). The CLI maps these to exit code 2.
class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backend failure: authentication, provider rejection, exhausted retries,
// unknown job.
class ProviderError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace traitforge
