#pragma once

#include <stdexcept>
#include <string>

namespace osmac {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- data ingestion ---------------------------------------------------------

struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t row)
        : Error(msg + " (row " + std::to_string(row) + ")"), row(row) {}
    std::size_t row;
};

struct SchemaError : Error {
    SchemaError(const std::string& msg, std::size_t row)
        : Error(msg + " (row " + std::to_string(row) + ")"), row(row) {}
    explicit SchemaError(const std::string& msg) : Error(msg), row(0) {}
    std::size_t row;
};

struct IoError : Error {
    using Error::Error;
};

// -- solver -----------------------------------------------------------------

struct SingularHessianError : Error {
    using Error::Error;
};

// -- sampling-plan construction --------------------------------------------

struct DegenerateClassesError : Error {
    using Error::Error;
};

struct ZeroMassError : Error {
    using Error::Error;
};

struct SingularMxError : Error {
    using Error::Error;
};

struct DivisionByZeroMassError : Error {
    using Error::Error;
};

// -- random machinery -------------------------------------------------------

struct NotNormalizedError : Error {
    using Error::Error;
};

struct WrongSchemeError : Error {
    using Error::Error;
};

// -- estimators -------------------------------------------------------------

struct EmptyAcceptanceError : Error {
    using Error::Error;
};

struct SingularMxHatError : Error {
    using Error::Error;
};

// -- experiment harness -----------------------------------------------------

struct SpecError : Error {
    using Error::Error;
};

}  // namespace osmac
