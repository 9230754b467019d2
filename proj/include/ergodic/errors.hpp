#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ergodic {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated on an input value (bad size, nonpositive length, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Tangent frame could not be built (rank-deficient neighborhood).
class FrameError : public Error {
 public:
  using Error::Error;
};

/// Laplacian assembly failed; carries the offending point indices.
class OperatorError : public Error {
 public:
  OperatorError(const std::string& what, std::vector<std::size_t> indices)
      : Error(what), indices_(std::move(indices)) {}

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Geometric construction failed (degenerate fit, wedge, projection, split, log).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Agent has fewer than four surface points nearby even after widening the search.
class LostAgentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ergodic
