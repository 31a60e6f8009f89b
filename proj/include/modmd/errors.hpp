#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace modmd {

// Malformed Pauli-sum or config text. line() is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Requested problem exceeds a dense-simulation cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fewer eigenvalues survived filtering than were requested.
class ShortfallError : public std::runtime_error {
 public:
  ShortfallError(const std::string& what, std::vector<std::complex<double>> survivors)
      : std::runtime_error(what), survivors_(std::move(survivors)) {}
  const std::vector<std::complex<double>>& survivors() const { return survivors_; }

 private:
  std::vector<std::complex<double>> survivors_;
};

}  // namespace modmd
