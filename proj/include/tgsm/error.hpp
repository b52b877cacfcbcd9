#pragma once

#include <stdexcept>

namespace tgsm {

// File or stream contents that do not match their declared format.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Byte sequences that are not valid UTF-8.
struct EncodingError : FormatError {
  using FormatError::FormatError;
};

}  // namespace tgsm
