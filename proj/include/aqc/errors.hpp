#pragma once

#include <stdexcept>
#include <string>

namespace aqc {

// Base for every error raised by the library. The CLI maps UsageError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ReferenceError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ShapeError : FormatError { using FormatError::FormatError; };
struct IoError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };

}  // namespace aqc
