#pragma once

#include <stdexcept>
#include <string>

namespace odflow {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidBounds : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class InvalidCell : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A predictor answer that could not be turned into a Prediction. Keeps the
/// raw text so callers can log what the model actually produced.
class ParseError : public Error {
 public:
  ParseError(const std::string& reason, std::string raw)
      : Error("parse error: " + reason), reason_(reason), raw_(std::move(raw)) {}

  const std::string& reason() const noexcept { return reason_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string reason_;
  std::string raw_;
};

/// Endpoint unreachable, timed out, or answered with a non-200 status after
/// all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace odflow
