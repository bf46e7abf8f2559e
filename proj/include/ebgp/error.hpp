#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebgp {

// Raised for out-of-domain scalar arguments (t <= 0, k > n, infeasible
// exponents, ...). Maps to CLI exit code 2.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for malformed or inconsistent data (empty matrices, dimension
// mismatches, unreadable files). Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical routine cannot produce a result. Maps to CLI exit
// code 3.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky factorization failed even after the full jitter escalation.
class FactorizationFailure : public NumericalFailure {
 public:
  explicit FactorizationFailure(std::vector<double> attempted)
      : NumericalFailure(describe(attempted)), attempted_(std::move(attempted)) {}

  const std::vector<double>& attempted_jitter() const noexcept { return attempted_; }

 private:
  static std::string describe(const std::vector<double>& levels) {
    std::ostringstream os;
    os << "Cholesky factorization failed; attempted jitter levels:";
    for (double j : levels) os << ' ' << j;
    return os.str();
  }

  std::vector<double> attempted_;
};

// The dimension estimator hit R_k == R_{ceil(k/2)}.
class DegenerateRatio : public NumericalFailure {
 public:
  DegenerateRatio() : NumericalFailure("degenerate-ratio") {}
};

namespace detail {

template <class E = InvalidParameter>
inline void require(bool cond, const char* what) {
  if (!cond) throw E(what);
}

}  // namespace detail
}  // namespace ebgp
