#ifndef DETMAX_SYNTH_HPP
#define DETMAX_SYNTH_HPP

#include <cstdint>
#include <optional>

#include "detmax/common.hpp"

namespace detmax {

/// Sources S (n x t), mixing A (m x n) and observations X = A S + N (m x t).
struct MixtureDataset {
  Matrix S;
  Matrix A;
  Matrix X;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
};

enum class ToeplitzKind { ConstantRow, PowerRow };
enum class CopulaRange { ZeroOne, SymmetricOne };

struct CopulaConfig {
  Index n = 5;
  Index t = 10000;
  double rho = 0.0;
  ToeplitzKind toeplitz_kind = ToeplitzKind::ConstantRow;
  CopulaRange range = CopulaRange::ZeroOne;
  double dof = 4.0;
};

/// Symmetric Toeplitz correlation matrix with first row [1 r r r ...]
/// (ConstantRow) or [1 r r^2 r^3 ...] (PowerRow).
Matrix calibration_matrix(Index n, double rho, ToeplitzKind kind);

/// Student-t copula samples: a multivariate t draw with the calibration
/// correlation pushed through the univariate t CDF, then mapped to the range.
Matrix sample_copula_t(const CopulaConfig& cfg, Rng& rng);

/// i.i.d. symbols from {-3, -1, 1, 3}.
Matrix sample_4pam(Index n, Index t, Rng& rng);

inline constexpr int kMixingRetryCap = 16;

/// i.i.d. standard normal m x n matrix, re-drawn while its smallest singular
/// value is below 1e-8.
Matrix random_mixing_matrix(Index m, Index n, Rng& rng);

/// X = A S + N with noise variance mean((A S)^2) * 10^(-snr_db / 10). Zero
/// signal power gives zero noise.
MixtureDataset mix_and_corrupt(const Matrix& S, const Matrix& A, std::optional<double> snr_db,
                               Rng& rng);

}  // namespace detmax

#endif  // DETMAX_SYNTH_HPP
