#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cliff {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Malformed text input. Carries the 1-based line number of the offending row.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input is well-formed but violates a data invariant (duplicate timestamps, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DegenerateSplit : public Error {
public:
    using Error::Error;
};

/// Map file problems: bad structure, unknown version, checksum mismatch.
class MalformedFile : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public MalformedFile {
public:
    using MalformedFile::MalformedFile;
};

class ChecksumMismatch : public MalformedFile {
public:
    using MalformedFile::MalformedFile;
};

}  // namespace cliff
