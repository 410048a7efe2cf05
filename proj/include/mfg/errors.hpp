#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfg {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter or argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An ODE/SDE integration produced a non-finite state.
class IntegrationBlowup : public Error {
 public:
  explicit IntegrationBlowup(double time)
      : Error("integration blow-up: non-finite state at t = " +
              std::to_string(time)),
        time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// An iterative solver exhausted its budget before reaching tolerance.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }
  double last_residual() const noexcept {
    return residuals_.empty() ? 0.0 : residuals_.back();
  }

 private:
  std::vector<double> residuals_;
};

/// A model has no equilibrium for the given parameters; `condition()`
/// names the inequality that failed.
class Infeasible : public Error {
 public:
  Infeasible(std::string condition, const std::string& detail)
      : Error("infeasible: " + condition + " (" + detail + ")"),
        condition_(std::move(condition)) {}
  const std::string& condition() const noexcept { return condition_; }

 private:
  std::string condition_;
};

}  // namespace mfg
