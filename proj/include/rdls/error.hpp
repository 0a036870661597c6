#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdls {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A configured resource budget (element count, memory) would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix sizes do not match the decomposition/mesh they refer to.
class ConformanceError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration. `key()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Singular operator: Krylov breakdown without convergence, or a local
/// factorization failure. `subdomain()` is -1 when not tied to a subdomain.
class SingularError : public Error {
 public:
  explicit SingularError(const std::string& what, int subdomain = -1)
      : Error(what), subdomain_(subdomain) {}

  int subdomain() const noexcept { return subdomain_; }

 private:
  int subdomain_;
};

/// Iterative solver hit its iteration cap. Keeps the best iterate found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, int iterations,
                   double residual)
      : Error(what), best_(std::move(best)), iterations_(iterations), residual_(residual) {}

  const std::vector<double>& best_iterate() const noexcept { return best_; }
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_;
  int iterations_;
  double residual_;
};

/// Failure inside a time step; wraps the original message with the step
/// number and the PDE being solved.
class StepError : public Error {
 public:
  StepError(int step, std::string pde, const std::string& what)
      : Error("step " + std::to_string(step) + ", " + pde + " PDE: " + what), step_(step), pde_(std::move(pde)) {}

  int step() const noexcept { return step_; }
  const std::string& pde() const noexcept { return pde_; }

 private:
  int step_;
  std::string pde_;
};

}  // namespace rdls
