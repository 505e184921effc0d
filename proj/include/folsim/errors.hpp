#pragma once

#include <stdexcept>
#include <string>

namespace folsim {

// Base class so callers can catch everything this library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

struct FoliationViolation : Error {
    explicit FoliationViolation(const std::string& msg) : Error(msg) {}
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

struct SchemeError : Error {
    explicit SchemeError(const std::string& msg) : Error(msg) {}
};

struct HorizonError : Error {
    explicit HorizonError(const std::string& msg) : Error(msg) {}
};

struct MeasureUnknown : Error {
    explicit MeasureUnknown(const std::string& msg) : Error(msg) {}
};

struct FitError : Error {
    explicit FitError(const std::string& msg) : Error(msg) {}
};

struct EnvelopeError : Error {
    explicit EnvelopeError(const std::string& msg) : Error(msg) {}
};

struct JacobianMissing : Error {
    explicit JacobianMissing(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line(line), column(column) {}
    int line;
    int column;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace folsim
