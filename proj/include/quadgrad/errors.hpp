#pragma once

#include <stdexcept>
#include <string>

namespace quadgrad {

/// Base class of every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An integrability exponent (or θ, λ) falls outside its admissible range.
class exponent_out_of_range : public error {
 public:
  using error::error;
};

/// f or a₀ vanishes, so the δ₁ and Z_δ formulas would divide by zero.
class degenerate_data : public error {
 public:
  using error::error;
};

/// α − C_N²‖a₀‖ ≤ 0: δ₁ and G are undefined.
class nonpositive_delta1 : public error {
 public:
  using error::error;
};

class domain_error : public error {
 public:
  using error::error;
};

class delta_out_of_range : public error {
 public:
  using error::error;
};

class smallness_violated : public error {
 public:
  using error::error;
};

class bracket_error : public error {
 public:
  using error::error;
};

class no_two_zeros : public error {
 public:
  using error::error;
};

/// exp(δ|u|) would overflow in the forward substitution.
class transform_overflow : public error {
 public:
  transform_overflow(const std::string& what, long node = -1)
      : error(what), node_(node) {}
  [[nodiscard]] long node() const noexcept { return node_; }

 private:
  long node_;
};

class iterative_solve_failure : public error {
 public:
  iterative_solve_failure(const std::string& what, double residual, int iterations)
      : error(what), residual_(residual), iterations_(iterations) {}
  [[nodiscard]] double residual() const noexcept { return residual_; }
  [[nodiscard]] int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class newton_stall : public error {
 public:
  newton_stall(const std::string& what, double residual)
      : error(what), residual_(residual) {}
  [[nodiscard]] double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class config_error : public error {
 public:
  using error::error;
};

class invariant_violation : public error {
 public:
  using error::error;
};

}  // namespace quadgrad
