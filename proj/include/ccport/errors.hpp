#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccport {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EncodingError : public Error {
public:
    using Error::Error;
};

/// Malformed C input. Carries the file and 1-based line of the problem.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string &what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

    const std::string &file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Bounds annotation text that does not follow the count/byte_count/bounds grammar.
class BoundsSyntaxError : public Error {
public:
    using Error::Error;
};

class DegenerateArray : public Error {
public:
    using Error::Error;
};

class NameCollision : public Error {
public:
    using Error::Error;
};

class BackendUnavailable : public Error {
public:
    using Error::Error;
};

class ReplayMiss : public Error {
public:
    using Error::Error;
};

class PromptTooLarge : public Error {
public:
    using Error::Error;
};

class MalformedBlock : public Error {
public:
    using Error::Error;
};

/// A patch could not be applied; the target text is left untouched.
class PatchRejected : public Error {
public:
    enum class Reason { NoMatch, AmbiguousOverlap };

    PatchRejected(Reason reason, std::size_t block, const std::string &what)
        : Error(what), reason_(reason), block_(block) {}

    Reason reason() const { return reason_; }
    std::size_t block() const { return block_; }

private:
    Reason reason_;
    std::size_t block_;
};

class GroundTruthMismatch : public Error {
public:
    using Error::Error;
};

} // namespace ccport
