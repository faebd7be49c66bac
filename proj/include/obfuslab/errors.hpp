#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obfuslab {

// Base of every error this library throws. The CLI maps ConfigError,
// InputError, ParseError, CheckpointError to exit status 2 and everything
// else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Pearson correlation of a zero-variance vector.
class UndefinedSimilarityError : public Error {
 public:
  using Error::Error;
};

}  // namespace obfuslab
