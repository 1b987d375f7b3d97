#include "detmax/synth.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace detmax {

Matrix calibration_matrix(Index n, double rho, ToeplitzKind kind) {
  require(n >= 1, "calibration matrix dimension must be positive");
  Matrix R(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index lag = std::abs(i - j);
      if (lag == 0) {
        R(i, j) = 1.0;
      } else {
        R(i, j) = kind == ToeplitzKind::ConstantRow ? rho
                                                     : std::pow(rho, static_cast<double>(lag));
      }
    }
  }
  return R;
}

namespace {

Matrix cholesky_or_throw(const Matrix& R) {
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  // Report the first leading principal minor that breaks positive definiteness.
  for (Index k = 1; k <= R.rows(); ++k) {
    Eigen::LLT<Matrix> leading(R.topLeftCorner(k, k));
    if (leading.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "calibration matrix is not positive definite: leading minor of order " << k
          << " fails";
      throw ContractViolation(msg.str());
    }
  }
  throw ContractViolation("calibration matrix is not positive definite");
}

}  // namespace

Matrix sample_copula_t(const CopulaConfig& cfg, Rng& rng) {
  require(cfg.n >= 1 && cfg.t >= 1, "copula dimensions must be positive");
  require(cfg.rho >= 0.0 && cfg.rho < 1.0, "copula rho must lie in [0, 1)");
  require(cfg.dof > 0.0, "copula degrees of freedom must be positive");

  const Matrix L = cholesky_or_throw(calibration_matrix(cfg.n, cfg.rho, cfg.toeplitz_kind));
  const boost::math::students_t_distribution<double> marginal(cfg.dof);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(cfg.dof);

  Matrix out(cfg.n, cfg.t);
  Vector g(cfg.n);
  for (Index j = 0; j < cfg.t; ++j) {
    for (Index i = 0; i < cfg.n; ++i) g[i] = normal(rng);
    const double scale = std::sqrt(chi2(rng) / cfg.dof);
    const Vector z = L * g / scale;
    for (Index i = 0; i < cfg.n; ++i) {
      const double u = boost::math::cdf(marginal, z[i]);
      out(i, j) = cfg.range == CopulaRange::ZeroOne ? u : 2.0 * u - 1.0;
    }
  }
  return out;
}

Matrix sample_4pam(Index n, Index t, Rng& rng) {
  require(n >= 1 && t >= 1, "4-PAM dimensions must be positive");
  static constexpr double kSymbols[4] = {-3.0, -1.0, 1.0, 3.0};
  std::uniform_int_distribution<int> pick(0, 3);
  Matrix out(n, t);
  for (Index j = 0; j < t; ++j)
    for (Index i = 0; i < n; ++i) out(i, j) = kSymbols[pick(rng)];
  return out;
}

Matrix random_mixing_matrix(Index m, Index n, Rng& rng) {
  require(n >= 1 && m >= n, "mixing matrix needs m >= n >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix A(m, n);
  for (int attempt = 0; attempt < kMixingRetryCap; ++attempt) {
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) A(i, j) = normal(rng);
    Eigen::JacobiSVD<Matrix> svd(A);
    if (svd.singularValues().minCoeff() > 1e-8) return A;
  }
  throw Error("could not draw a full-rank mixing matrix within the retry cap");
}

MixtureDataset mix_and_corrupt(const Matrix& S, const Matrix& A, std::optional<double> snr_db,
                               Rng& rng) {
  require(A.cols() == S.rows(), "mixing matrix columns must match source count");
  MixtureDataset data{S, A, A * S, snr_db, 0};
  if (!snr_db) return data;

  const double power = data.X.size() > 0 ? data.X.squaredNorm() / static_cast<double>(data.X.size())
                                         : 0.0;
  const double sigma = std::sqrt(power * std::pow(10.0, -*snr_db / 10.0));
  if (sigma == 0.0) return data;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Index j = 0; j < data.X.cols(); ++j)
    for (Index i = 0; i < data.X.rows(); ++i) data.X(i, j) += noise(rng);
  return data;
}

}  // namespace detmax
