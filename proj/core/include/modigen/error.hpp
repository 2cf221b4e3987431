// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace modigen {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Error anchored at a source position (1-based line and column).
class SourceError : public Error {
public:
    SourceError(int line, int column, std::string message)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column), message_(std::move(message)) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    /// Message without the position prefix.
    const std::string& message() const noexcept { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

class UnterminatedString : public SourceError {
public:
    UnterminatedString(int line, int column)
        : SourceError(line, column, "unterminated string literal") {}
};

class UnterminatedComment : public SourceError {
public:
    UnterminatedComment(int line, int column)
        : SourceError(line, column, "unterminated block comment") {}
};

class InvalidCharacter : public SourceError {
public:
    using SourceError::SourceError;
};

class SyntaxError : public SourceError {
public:
    using SourceError::SourceError;
};

class UnbalancedAnnotation : public SourceError {
public:
    UnbalancedAnnotation(int line, int column)
        : SourceError(line, column, "unbalanced parentheses in annotation") {}
};

class IoError : public Error {
public:
    IoError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class UnknownPlaceholder : public Error {
public:
    explicit UnknownPlaceholder(std::string name)
        : Error("unknown template placeholder {" + name + "}"), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class AuthError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class SpawnError : public Error {
public:
    using Error::Error;
};

class ProtocolTimeout : public Error {
public:
    explicit ProtocolTimeout(double seconds)
        : Error("compiler did not respond within " + std::to_string(seconds) + " s"),
          seconds_(seconds) {}
    double seconds() const noexcept { return seconds_; }

private:
    double seconds_;
};

class FixtureFormatError : public Error {
public:
    using Error::Error;
};

class UnsupportedConstruct : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    NumericError(const std::string& variable, double time)
        : Error("non-finite value of '" + variable + "' at t=" + std::to_string(time)),
          time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// The backend session died or became unusable mid-request.
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

class NoFailure : public Error {
public:
    NoFailure() : Error("report has no failing stage; nothing to repair") {}
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

}  // namespace modigen
