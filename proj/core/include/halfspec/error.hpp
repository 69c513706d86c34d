#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace halfspec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent file contents (cube files, archives, spec files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments or inputs that violate an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A Cholesky pivot was not strictly positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t permuted_pivot, std::size_t original_index, double value)
      : Error("matrix not positive definite: pivot " + std::to_string(permuted_pivot) +
              " (original index " + std::to_string(original_index) + ") = " +
              std::to_string(value)),
        pivot(permuted_pivot),
        original(original_index) {}

  std::size_t pivot;
  std::size_t original;
};

/// The requested compression ratio leaves no room for the model block.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace halfspec
