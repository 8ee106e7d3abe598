#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace sbldoa {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the domain of the operation (bad angle, K >= N, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but carries too little structure to answer
// (flat spectrum, all-zero power vector, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A factorization or solve failed. When raised from the iterative driver the
// 1-based iteration index is attached.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what,
                          std::optional<int> iteration = std::nullopt)
      : Error(iteration ? what + " (iteration " + std::to_string(*iteration) + ")"
                        : what),
        iteration_(iteration) {}

  std::optional<int> iteration() const { return iteration_; }

 private:
  std::optional<int> iteration_;
};

}  // namespace sbldoa
