#pragma once

#include <stdexcept>
#include <string>

namespace hgmp {

/// Base for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on domain values failed (bad ratio, empty corpus, frozen encoder...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Reading or writing files failed, or on-disk data is malformed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A configuration value is missing, malformed, or inconsistent with the data.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hgmp
