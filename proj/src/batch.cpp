#include "detmax/batch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace detmax {

namespace {

constexpr double kRidge = 1e-8;
constexpr int kMaxHalvings = 40;

Matrix random_orthogonal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Vector d = qr.matrixQR().diagonal();
  for (Index j = 0; j < n; ++j)
    if (d[j] < 0.0) Q.col(j) *= -1.0;
  return Q;
}

// ln det of a symmetric positive definite matrix; -inf if the factorization fails.
constexpr double kPenaltyGrowthCap = 1e4;
constexpr double kPenaltySettle = 1e-7;

double spd_logdet(const Matrix& R) {
  Eigen::LLT<Matrix> llt(R);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vector d = llt.matrixL().toDenseMatrix().diagonal();
  // pivots at rounding level mean a rank-deficient matrix
  const double floor = 1e-14 * std::max(R.diagonal().maxCoeff(), 0.0);
  for (Index i = 0; i < d.size(); ++i)
    if (!(d[i] * d[i] > floor)) return -std::numeric_limits<double>::infinity();
  return 2.0 * d.array().log().sum();
}

void check_finite(const Matrix& M, int iter, const char* what) {
  if (!M.allFinite())
    throw DivergenceError(std::string(what) + " produced non-finite values", iter);
}

Matrix centered(const Matrix& M) { return M.colwise() - M.rowwise().mean(); }

// The LD-InfoMax objective ignores row offsets, so rows that only carry box
// bounds are slid to the box midpoint before projection. Otherwise one face
// clips early and the iterate cannot grow along that coordinate.
std::vector<Index> box_only_rows(const SourceDomainSpec& spec) {
  if (spec.kind() == DomainKind::Antisparse || spec.kind() == DomainKind::NonnegAntisparse) {
    std::vector<Index> all(static_cast<std::size_t>(spec.n()));
    for (Index i = 0; i < spec.n(); ++i) all[static_cast<std::size_t>(i)] = i;
    return all;
  }
  if (spec.kind() != DomainKind::General) return {};
  std::vector<bool> grouped(static_cast<std::size_t>(spec.n()), false);
  for (const auto& g : spec.groups())
    for (Index i : g) grouped[static_cast<std::size_t>(i)] = true;
  std::vector<Index> rows;
  for (Index i = 0; i < spec.n(); ++i)
    if (!grouped[static_cast<std::size_t>(i)]) rows.push_back(i);
  return rows;
}

void center_box_rows(const SourceDomainSpec& spec, const std::vector<Index>& rows, Matrix& Y) {
  for (Index i : rows) {
    const double mid = spec.is_nonneg(i) ? 0.5 : 0.0;
    Y.row(i).array() += mid - 0.5 * (Y.row(i).maxCoeff() + Y.row(i).minCoeff());
  }
}

struct PmfState {
  Matrix H;
  double objective = 0.0;
  bool ridge = false;
};

PmfState pmf_evaluate(const Matrix& X, const Matrix& Y, double penalty) {
  const double t = static_cast<double>(Y.cols());
  PmfState s;
  Matrix G = Y * Y.transpose();
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success) {
    s.ridge = true;
    G += kRidge * Matrix::Identity(G.rows(), G.cols());
    llt.compute(G);
  }
  s.H = llt.solve(Y * X.transpose()).transpose();
  const double fit = (s.H * Y - X).squaredNorm();
  s.objective = spd_logdet(G / t) - 0.5 * penalty * fit / t;
  return s;
}

// Mean removal leaves y and lo + hi - y indistinguishable on a nonnegative
// box coordinate. X = A S carries no intercept, so keep whichever orientation
// a purely linear map of X reproduces better.
void orient_box_rows(const SourceDomainSpec& spec, const std::vector<Index>& rows,
                     const Matrix& X, Matrix& Y) {
  if (rows.empty()) return;
  const Matrix Gx = X * X.transpose() + kRidge * Matrix::Identity(X.rows(), X.rows());
  const Eigen::LLT<Matrix> llt(Gx);
  auto misfit = [&](const Vector& y) {
    const Vector w = llt.solve(X * y);
    return (X.transpose() * w - y).squaredNorm();
  };
  for (Index i : rows) {
    if (!spec.is_nonneg(i)) continue;
    const Vector y = Y.row(i).transpose();
    const Vector flipped = Vector::Ones(y.size()) - y;
    if (misfit(flipped) < misfit(y)) Y.row(i) = flipped.transpose();
  }
}

}  // namespace

LogDetResult logdet_correlation(const Matrix& Y) {
  LogDetResult r;
  r.value = spd_logdet(Y * Y.transpose());
  r.full_rank = std::isfinite(r.value);
  return r;
}

Matrix batch_initial_y(const Matrix& X, const SourceDomainSpec& spec, Rng& rng) {
  const Index n = spec.n();
  require(X.rows() >= n, "need at least as many mixtures as sources");
  require(X.cols() >= 2, "need at least two samples");
  const double t = static_cast<double>(X.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(X * X.transpose() / t);
  const Index m = X.rows();
  Matrix Wt(n, m);
  for (Index i = 0; i < n; ++i) {
    const Index k = m - 1 - i;  // eigenvalues come in ascending order
    const double lam = std::max(eig.eigenvalues()[k], 1e-12);
    Wt.row(i) = eig.eigenvectors().col(k).transpose() / std::sqrt(lam);
  }
  Matrix Y = random_orthogonal(n, rng) * Wt * X;
  // Shrink the cloud around an interior point so projection clips little.
  Vector mid = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    if (spec.is_nonneg(i)) mid[i] = 0.5;
  const Vector center = project_euclidean(spec, mid);
  double room = 1.0;
  for (Index i = 0; i < n; ++i)
    if (spec.is_nonneg(i)) room = std::min(room, center[i]);
  if (spec.kind() != DomainKind::Antisparse && spec.kind() != DomainKind::NonnegAntisparse)
    room /= static_cast<double>(n);
  const double peak = Y.cwiseAbs().maxCoeff();
  if (peak > 0.0) Y *= 0.5 * room / peak;
  Y.colwise() += center - Y.rowwise().mean();
  project_columns(spec, Y);
  return Y;
}

BatchResult pmf_fit(const Matrix& X, const SourceDomainSpec& spec, const BatchOptions& options,
                    Rng& rng) {
  require(options.iters >= 0, "iteration count must be nonnegative");
  require(options.lr > 0.0 && options.penalty > 0.0, "step and penalty must be positive");
  require(X.allFinite(), "input must be finite");
  BatchResult out;
  out.Y = batch_initial_y(X, spec, rng);
  double penalty = options.penalty;
  PmfState cur = pmf_evaluate(X, out.Y, penalty);
  out.ridge_used = cur.ridge;
  double lr = options.lr;

  for (int it = 0; it < options.iters; ++it) {
    const double t = static_cast<double>(out.Y.cols());
    const Matrix R = out.Y * out.Y.transpose() / t;
    Eigen::LLT<Matrix> llt(R + (cur.ridge ? kRidge : 0.0) * Matrix::Identity(R.rows(), R.cols()));
    const Matrix dir = 2.0 * llt.solve(out.Y) - penalty * cur.H.transpose() * (cur.H * out.Y - X);
    check_finite(dir, it + 1, "PMF gradient");

    bool accepted = false;
    double gain = 0.0;
    for (int k = 0; k < kMaxHalvings && !accepted; ++k) {
      Matrix trial = out.Y + lr * dir;
      project_columns(spec, trial);
      PmfState next = pmf_evaluate(X, trial, penalty);
      if (std::isfinite(next.objective) && next.objective >= cur.objective) {
        gain = next.objective - cur.objective;
        out.Y = std::move(trial);
        out.ridge_used = out.ridge_used || next.ridge;
        cur = std::move(next);
        accepted = true;
        lr *= 1.2;
      } else {
        lr *= 0.5;
      }
    }
    out.iterations = it + 1;
    if (options.record_trace) out.objective_trace.push_back(logdet_correlation(out.Y).value);
    // Continuation: once the penalized problem has settled, stiffen the
    // penalty so the residual keeps shrinking instead of stalling at O(1/mu).
    const bool settled = !accepted || gain <= kPenaltySettle * (1.0 + std::abs(cur.objective));
    if (settled && penalty < options.penalty * kPenaltyGrowthCap) {
      penalty = std::min(2.0 * penalty, options.penalty * kPenaltyGrowthCap);
      cur = pmf_evaluate(X, out.Y, penalty);
      lr = options.lr;
    } else if (!accepted) {
      break;  // no ascent direction left at machine precision
    }
  }
  check_finite(out.Y, out.iterations, "PMF");
  out.H = cur.H;
  return out;
}

double ldinfomax_objective(const Matrix& Y, const Matrix& X, double eps_reg) {
  require(eps_reg > 0.0, "eps_reg must be positive");
  const double t = static_cast<double>(Y.cols());
  const Index n = Y.rows();
  const Matrix Yc = centered(Y);
  const Matrix Xc = centered(X);
  const Matrix Ry = Yc * Yc.transpose() / t;
  const Matrix Ryx = Yc * Xc.transpose() / t;
  const Matrix Rx = Xc * Xc.transpose() / t;
  const Matrix Px = (Rx + eps_reg * Matrix::Identity(Rx.rows(), Rx.cols())).inverse();
  const Matrix I = eps_reg * Matrix::Identity(n, n);
  const Matrix E = Ry - Ryx * Px * Ryx.transpose() + I;
  return 0.5 * spd_logdet(Ry + I) - 0.5 * spd_logdet(E);
}

Matrix ldinfomax_gradient(const Matrix& Y, const Matrix& X, double eps_reg) {
  require(eps_reg > 0.0, "eps_reg must be positive");
  const double t = static_cast<double>(Y.cols());
  const Index n = Y.rows();
  const Matrix Yc = centered(Y);
  const Matrix Xc = centered(X);
  const Matrix Ry = Yc * Yc.transpose() / t;
  const Matrix Ryx = Yc * Xc.transpose() / t;
  const Matrix Rx = Xc * Xc.transpose() / t;
  const Matrix Px = (Rx + eps_reg * Matrix::Identity(Rx.rows(), Rx.cols())).inverse();
  const Matrix I = eps_reg * Matrix::Identity(n, n);
  const Matrix E = Ry - Ryx * Px * Ryx.transpose() + I;
  const Matrix residual = Yc - Ryx * (Px * Xc);
  return ((Ry + I).llt().solve(Yc) - E.llt().solve(residual)) / t;
}

BatchResult ldinfomax_fit(const Matrix& X, const SourceDomainSpec& spec,
                          const BatchOptions& options, Rng& rng) {
  require(options.iters >= 0, "iteration count must be nonnegative");
  require(options.lr > 0.0, "step must be positive");
  require(options.eps_reg > 0.0, "eps_reg must be positive");
  require(X.allFinite(), "input must be finite");
  BatchResult out;
  out.Y = batch_initial_y(X, spec, rng);
  const double t = static_cast<double>(X.cols());
  double cur = ldinfomax_objective(out.Y, X, options.eps_reg);
  if (!std::isfinite(cur)) throw Error("LD-InfoMax covariance factorization failed");
  double lr = options.lr;
  const std::vector<Index> box_rows = box_only_rows(spec);

  for (int it = 0; it < options.iters; ++it) {
    const Matrix dir = t * ldinfomax_gradient(out.Y, X, options.eps_reg);
    check_finite(dir, it + 1, "LD-InfoMax gradient");
    bool accepted = false;
    for (int k = 0; k < kMaxHalvings && !accepted; ++k) {
      Matrix trial = out.Y + lr * dir;
      center_box_rows(spec, box_rows, trial);
      project_columns(spec, trial);
      const double next = ldinfomax_objective(trial, X, options.eps_reg);
      if (std::isfinite(next) && next >= cur) {
        out.Y = std::move(trial);
        cur = next;
        accepted = true;
        lr *= 1.2;
      } else {
        lr *= 0.5;
      }
    }
    out.iterations = it + 1;
    if (options.record_trace) out.objective_trace.push_back(cur);
    if (!accepted) break;
  }
  check_finite(out.Y, out.iterations, "LD-InfoMax");
  orient_box_rows(spec, box_rows, X, out.Y);
  const Matrix Gx = X * X.transpose() + kRidge * Matrix::Identity(X.rows(), X.rows());
  out.W = Gx.llt().solve(X * out.Y.transpose()).transpose();
  return out;
}

}  // namespace detmax
