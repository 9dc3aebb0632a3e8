#pragma once
// Error hierarchy shared by every stage of the engine.

#include <stdexcept>
#include <string>

namespace codarag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (empty prompt, empty claim list, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Lookup of an entity / relation id that is not stored in the graph.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// Structural invariant the graph refuses to accept (self-loop, missing endpoint).
class InvariantError : public Error {
public:
    using Error::Error;
};

// Malformed persisted record or config document. `line` is 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(file + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

// Network-level failure talking to a provider; the only retried category.
class TransportError : public Error {
public:
    using Error::Error;
};

// Provider answered, but refused or returned an error body. Message is verbatim.
class ProviderError : public Error {
public:
    using Error::Error;
};

// Judge / completion reply that does not follow the requested output grammar.
class JudgeFormatError : public Error {
public:
    using Error::Error;
};

} // namespace codarag
