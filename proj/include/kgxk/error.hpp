#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgxk {

// Base of every error raised by the library. `exit_code()` is what the CLI
// reports for it (1 usage/config, 2 data or contract, 3 training divergence).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class VocabError : public Error {
 public:
  explicit VocabError(const std::string& token)
      : Error("unknown name in fixed vocabulary: '" + token + "'"), token_(token) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }
  int exit_code() const noexcept override { return 3; }

 private:
  int epoch_;
};

}  // namespace kgxk
