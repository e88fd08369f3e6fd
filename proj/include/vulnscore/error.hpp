#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vulnscore {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Input is not syntactically valid (malformed JSON or XML).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"
                     : what),
          line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Input is well formed but does not follow the expected document structure.
class SchemaError : public Error {
public:
    using Error::Error;
};

class SchemaVersionError : public SchemaError {
public:
    explicit SchemaVersionError(const std::string& found)
        : SchemaError("unsupported schema_version '" + found + "' (expected '1')") {}
};

class UnknownFeatureError : public SchemaError {
public:
    explicit UnknownFeatureError(const std::string& name)
        : SchemaError("unknown feature '" + name + "'"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// A semantically invalid value (out of range, inverted dates, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class MissingFieldError : public ValidationError {
public:
    explicit MissingFieldError(const std::string& field)
        : ValidationError("missing required field '" + field + "'"), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class UnknownKeyError : public ValidationError {
public:
    explicit UnknownKeyError(const std::string& key)
        : ValidationError("unknown key '" + key + "'"), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class RangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DateInversionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Training or prediction cannot proceed (single-class data, empty mask, feature mismatch).
class ModelError : public Error {
public:
    using Error::Error;
};

} // namespace vulnscore
