#pragma once

#include <stdexcept>
#include <string>

namespace surgatt {

// Exit codes shared by the CLI. Data errors map to kDataError, NaN/Inf
// anywhere in a pipeline maps to kNumericalFailure.
enum class ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericalFailure = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::kDataError; }
};

class NoProposals : public Error {
public:
    NoProposals() : Error("proposal set is empty") {}
    explicit NoProposals(const std::string& what) : Error(what) {}
};

class ResolutionMismatch : public Error {
public:
    using Error::Error;
};

class SequenceMismatch : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& msg)
        : Error(file + ":" + std::to_string(line) + ": " + msg), file_(file), line_(line) {}
    explicit ParseError(const std::string& msg) : Error(msg) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_ = 0;
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class NumericalError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kNumericalFailure; }
};

}  // namespace surgatt
