#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace prism {

// Base of every error the library raises. Callers that only need to report
// a failure can catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad k, empty input, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Input data violates a domain invariant (rating out of scale, duplicate id).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class LookupError : public Error {
public:
    using Error::Error;
};

// Failure inside an encoder, generator or scorer backend.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, bool retriable)
        : Error(what), retriable_(retriable) {}

    bool retriable() const noexcept { return retriable_; }

private:
    bool retriable_;
};

// The indicator generator replied with something we could not parse.
class ExtractionError : public Error {
public:
    ExtractionError(const std::string& what, std::string raw_reply)
        : Error(what), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const noexcept { return raw_reply_; }

private:
    std::string raw_reply_;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// A stage input file is absent.
class MissingInputError : public Error {
public:
    explicit MissingInputError(std::string path)
        : Error("missing input artifact: " + path), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace prism
