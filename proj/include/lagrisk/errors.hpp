#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lagrisk {

/// Raised when an argument lies outside the mathematical domain of an operation
/// (quantile level outside (0,1), NaN inputs, invalid distribution parameters).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A cost function was evaluated outside its domain. Carries the offending
/// particle index when the caller knows it.
class CostDomainError : public DomainError {
 public:
  explicit CostDomainError(const std::string& what, std::ptrdiff_t particle = -1)
      : DomainError(what), particle_(particle) {}

  [[nodiscard]] std::ptrdiff_t particle() const noexcept { return particle_; }

 private:
  std::ptrdiff_t particle_;
};

/// An iterative numerical routine did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  [[nodiscard]] double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// An experiment configuration failed validation. The message carries the
/// source name and line when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lagrisk
