#pragma once

#include <stdexcept>
#include <string>

namespace sensel {

enum class ErrorKind {
  Parse,
  Validation,
  Config,
  InsufficientData,
  Transport,
  Protocol,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed input record; message carries the line number.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::InsufficientData, what) {}
};

/// Backend could not be reached or answered with a non-success status. Retryable.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(ErrorKind::Transport, what) {}
};

/// Backend answered, but the payload does not match the wire contract.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::Protocol, what) {}
};

}  // namespace sensel
