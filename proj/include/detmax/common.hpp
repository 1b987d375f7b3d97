#ifndef DETMAX_COMMON_HPP
#define DETMAX_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace detmax {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Every random draw in the library goes through this engine so that a seed
/// fully determines a run.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (shape mismatch, bad range, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its cap; the last iterate is kept for inspection.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Vector last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const Vector& last_iterate() const { return last_iterate_; }

 private:
  Vector last_iterate_;
};

/// Non-finite values showed up in an iteration. `iteration` is the inner
/// (neural or batch) step, `sample` the data index when known (-1 otherwise).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration, long sample = -1)
      : Error(what), iteration_(iteration), sample_(sample) {}
  long iteration() const { return iteration_; }
  long sample() const { return sample_; }

 private:
  long iteration_;
  long sample_;
};

/// Monte Carlo generator could not produce enough samples.
class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, double acceptance_rate)
      : Error(what), acceptance_rate_(acceptance_rate) {}
  double acceptance_rate() const { return acceptance_rate_; }

 private:
  double acceptance_rate_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace detmax

#endif  // DETMAX_COMMON_HPP
