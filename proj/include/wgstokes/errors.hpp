#pragma once

#include <stdexcept>
#include <string>

namespace wgstokes {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the failure modes that callers may want to tell apart.

/// A condition that cannot happen for valid input (broken mesh, solver bug).
class internal_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Object constructed in a state that violates its own invariants.
class invalid_state : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Inner A-solve of a block preconditioner did not converge.
class preconditioner_failure : public std::runtime_error {
public:
  preconditioner_failure(const std::string& what, double inner_residual)
      : std::runtime_error(what), inner_residual_(inner_residual) {}

  double inner_residual() const noexcept { return inner_residual_; }

private:
  double inner_residual_;
};

/// Incomplete factorization broke down even after diagonal shifting.
class factorization_failure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Conjugate gradients found a direction with p^T A p <= 0.
class operator_not_spd : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// More than one (near-)zero eigenvalue where exactly one is structural.
class rank_anomaly : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bound formula evaluated outside the parameter range where it is valid.
class constraint_violation : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace wgstokes
