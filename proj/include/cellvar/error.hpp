#pragma once

#include <stdexcept>
#include <string>

namespace cellvar {

// Base for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

// Malformed or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "data_error"; }
};

// Parameters outside a model's domain (e.g. tau <= 0).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain_error"; }
};

// Invalid configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config_error"; }
};

// A sub-sampling study had too many failed repeats to be trusted.
class StudyAborted : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "study_aborted"; }
};

} // namespace cellvar
