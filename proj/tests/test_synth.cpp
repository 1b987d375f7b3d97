#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "detmax/metrics.hpp"
#include "detmax/synth.hpp"

using namespace detmax;

namespace {

// Kolmogorov-Smirnov distance of a row against the uniform law on [lo, hi].
double ks_uniform(const Vector& row, double lo, double hi) {
  std::vector<double> v(row.data(), row.data() + row.size());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = (v[i] - lo) / (hi - lo);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  return d;
}

}  // namespace

TEST_CASE("calibration matrices follow the two Toeplitz patterns") {
  const Matrix c = calibration_matrix(4, 0.3, ToeplitzKind::ConstantRow);
  const Matrix p = calibration_matrix(4, 0.5, ToeplitzKind::PowerRow);
  CHECK(c(0, 3) == doctest::Approx(0.3));
  CHECK(c(2, 1) == doctest::Approx(0.3));
  CHECK(p(0, 3) == doctest::Approx(0.125));
  CHECK(p(3, 1) == doctest::Approx(0.25));
  CHECK(p.diagonal().isOnes());
}

TEST_CASE("copula marginals are uniform") {
  Rng rng(21);
  CopulaConfig cfg;
  cfg.n = 3;
  cfg.t = 100000;
  cfg.rho = 0.6;
  const Matrix S = sample_copula_t(cfg, rng);
  for (Index i = 0; i < 3; ++i) CHECK(ks_uniform(S.row(i), 0.0, 1.0) <= 0.01);

  cfg.range = CopulaRange::SymmetricOne;
  cfg.toeplitz_kind = ToeplitzKind::PowerRow;
  const Matrix T = sample_copula_t(cfg, rng);
  for (Index i = 0; i < 3; ++i) CHECK(ks_uniform(T.row(i), -1.0, 1.0) <= 0.01);
}

TEST_CASE("copula dependence matches the elliptical Kendall tau") {
  // Any elliptical copula has tau = (2/pi) asin(rho), whatever the dof.
  auto kendall = [](const Vector& a, const Vector& b) {
    long concordant = 0, discordant = 0;
    for (Index i = 0; i < a.size(); ++i)
      for (Index j = i + 1; j < a.size(); ++j) {
        const double s = (a[i] - a[j]) * (b[i] - b[j]);
        concordant += s > 0;
        discordant += s < 0;
      }
    return static_cast<double>(concordant - discordant) /
           static_cast<double>(concordant + discordant);
  };
  Rng rng(22);
  CopulaConfig cfg;
  cfg.n = 3;
  cfg.t = 3000;
  for (double rho : {0.0, 0.3, 0.6}) {
    cfg.rho = rho;
    const Matrix S = sample_copula_t(cfg, rng);
    const double expected = 2.0 / M_PI * std::asin(rho);
    CHECK(std::abs(kendall(S.row(0), S.row(1)) - expected) <= 0.03);
    CHECK(std::abs(kendall(S.row(0), S.row(2)) - expected) <= 0.03);
  }
  cfg.rho = 0.6;
  cfg.toeplitz_kind = ToeplitzKind::PowerRow;
  const Matrix P = sample_copula_t(cfg, rng);
  CHECK(std::abs(kendall(P.row(0), P.row(2)) - 2.0 / M_PI * std::asin(0.36)) <= 0.03);
}

TEST_CASE("copula input validation") {
  Rng rng(23);
  CopulaConfig cfg;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(sample_copula_t(cfg, rng), ContractViolation);
  cfg.rho = -0.1;
  CHECK_THROWS_AS(sample_copula_t(cfg, rng), ContractViolation);
}

TEST_CASE("4-PAM symbols are the four levels with equal frequency") {
  Rng rng(24);
  const Matrix S = sample_4pam(3, 40000, rng);
  std::set<double> levels(S.data(), S.data() + S.size());
  CHECK(levels == std::set<double>{-3.0, -1.0, 1.0, 3.0});
  const double frac = (S.array() == 3.0).cast<double>().mean();
  CHECK(frac == doctest::Approx(0.25).epsilon(0.04));
}

TEST_CASE("mixing noise hits the requested SNR") {
  Rng rng(25);
  const Matrix S = sample_4pam(5, 100000, rng);
  const Matrix A = random_mixing_matrix(10, 5, rng);
  const MixtureDataset d = mix_and_corrupt(S, A, 30.0, rng);
  const Matrix clean = A * S;
  const double snr = 10.0 * std::log10(clean.squaredNorm() / (d.X - clean).squaredNorm());
  CHECK(snr >= 29.8);
  CHECK(snr <= 30.2);

  const MixtureDataset exact = mix_and_corrupt(S, A, std::nullopt, rng);
  CHECK(exact.X == clean);
  const MixtureDataset zero = mix_and_corrupt(Matrix::Zero(5, 10), A, 10.0, rng);
  CHECK(zero.X.isZero());
}

TEST_CASE("mixing matrices have full column rank") {
  Rng rng(26);
  for (int k = 0; k < 20; ++k) {
    const Matrix A = random_mixing_matrix(6, 4, rng);
    Eigen::JacobiSVD<Matrix> svd(A);
    CHECK(svd.singularValues().minCoeff() > 1e-8);
  }
}

TEST_CASE("same seed, same draws") {
  Rng a(99), b(99);
  CopulaConfig cfg;
  cfg.t = 200;
  CHECK(sample_copula_t(cfg, a) == sample_copula_t(cfg, b));
}
