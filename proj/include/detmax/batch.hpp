#ifndef DETMAX_BATCH_HPP
#define DETMAX_BATCH_HPP

#include <optional>
#include <vector>

#include "detmax/common.hpp"
#include "detmax/domains.hpp"

namespace detmax {

struct LogDetResult {
  double value = 0.0;     // -inf when YY^T is singular
  bool full_rank = true;
};

/// ln det(Y Y^T) through a Cholesky factor. No regularization is added.
LogDetResult logdet_correlation(const Matrix& Y);

struct BatchOptions {
  int iters = 1500;
  double lr = 1e-3;         // initial step; grown on success, halved on failure
  double penalty = 100.0;   // PMF residual weight, per-sample units
  double eps_reg = 1e-3;    // LD-InfoMax covariance ridge
  bool record_trace = true;
  bool operator==(const BatchOptions&) const = default;
};

struct BatchResult {
  Matrix Y;                      // n x t estimates, every column in the domain
  std::optional<Matrix> H;       // PMF factor (m x n)
  std::optional<Matrix> W;       // LD-InfoMax least-squares separator (n x m)
  std::vector<double> objective_trace;
  int iterations = 0;
  bool ridge_used = false;       // PMF fell back to a ridge on a singular Gram
};

/// Starting point shared by both fits: top-n principal directions of X,
/// whitened, rotated by a random orthogonal matrix and shrunk into the domain.
Matrix batch_initial_y(const Matrix& X, const SourceDomainSpec& spec, Rng& rng);

/// Projected-gradient Det-Max factorization X ~ H Y with a quadratic penalty
/// on the residual and a least-squares refresh of H after every step.
BatchResult pmf_fit(const Matrix& X, const SourceDomainSpec& spec, const BatchOptions& options,
                    Rng& rng);

/// Log-determinant mutual information between outputs and inputs using
/// mean-removed sample covariances:
///   J = 1/2 ln det(Ry + eps I) - 1/2 ln det(Ry - Ryx (eps I + Rx)^-1 Rxy + eps I).
double ldinfomax_objective(const Matrix& Y, const Matrix& X, double eps_reg);
/// Gradient of ldinfomax_objective with respect to Y.
Matrix ldinfomax_gradient(const Matrix& Y, const Matrix& X, double eps_reg);

/// Projected gradient ascent on Y for the objective above.
BatchResult ldinfomax_fit(const Matrix& X, const SourceDomainSpec& spec,
                          const BatchOptions& options, Rng& rng);

}  // namespace detmax

#endif  // DETMAX_BATCH_HPP
