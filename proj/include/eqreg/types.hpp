#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eqreg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-major image geometry. Images are flattened row-major into vectors.
struct ImageShape {
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
  bool operator==(const ImageShape&) const = default;
};

// Error hierarchy. Everything derives from std::runtime_error so callers that
// do not care about the category can catch one type.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ResourceLimit : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class UndefinedQuantity : public Error {
 public:
  using Error::Error;
};

/// Raised when a residual operator is not a strict contraction.
class ContractivityViolation : public Error {
 public:
  ContractivityViolation(const std::string& what, double measured_norm)
      : Error(what), measured_norm_(measured_norm) {}
  double measured_norm() const { return measured_norm_; }

 private:
  double measured_norm_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace eqreg
