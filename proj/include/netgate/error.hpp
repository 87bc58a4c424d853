#pragma once

#include <stdexcept>
#include <string>

namespace netgate {

// Exit-code families used by the command-line tool.
enum class ErrorKind { Config = 2, Data = 3, Numerical = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct InvalidParameter : ConfigError {
  using ConfigError::ConfigError;
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct ParseError : DataError {
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

// One treatment arm has too few units (or no exposed units) to estimate from.
struct DegenerateArm : NumericalError {
  DegenerateArm(const std::string& what, std::size_t count0, std::size_t count1)
      : NumericalError(what), count0_(count0), count1_(count1) {}
  std::size_t count0() const noexcept { return count0_; }
  std::size_t count1() const noexcept { return count1_; }

 private:
  std::size_t count0_;
  std::size_t count1_;
};

struct SingularDesign : NumericalError {
  using NumericalError::NumericalError;
};

struct PositivityViolation : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace netgate
