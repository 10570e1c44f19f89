#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dslgen {

// Root of every error the toolkit throws. Each class maps to one failure
// kind callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class InvalidExample : public Error {
 public:
  using Error::Error;
};

class EmbedError : public Error {
 public:
  using Error::Error;
};

class DegenerateVector : public Error {
 public:
  using Error::Error;
};

class ProviderMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyCatalog : public Error {
 public:
  using Error::Error;
};

class BudgetImpossible : public Error {
 public:
  using Error::Error;
};

class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status, std::size_t attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  // 0 when no HTTP response was received (connection failure, timeout).
  int status() const noexcept { return status_; }
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  int status_;
  std::size_t attempts_;
};

class RateLimited : public HttpError {
 public:
  using HttpError::HttpError;
};

class ContentEmpty : public Error {
 public:
  using Error::Error;
};

class UnresolvedApi : public Error {
 public:
  using Error::Error;
};

class GenerationRejected : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class TestsetMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dslgen
