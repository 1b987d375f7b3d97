#include "detmax/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace detmax {

PearsonResult pearson_matrix(const Matrix& A, const Matrix& B) {
  require(A.cols() == B.cols() && A.cols() >= 2, "pearson_matrix: need matching t >= 2");
  PearsonResult out{Matrix::Zero(A.rows(), B.rows()), false};
  const auto center = [](const Matrix& M) {
    Matrix c = M.colwise() - M.rowwise().mean();
    return c;
  };
  const Matrix Ac = center(A);
  const Matrix Bc = center(B);
  const Vector an = Ac.rowwise().norm();
  const Vector bn = Bc.rowwise().norm();
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      if (an[i] == 0.0 || bn[j] == 0.0) {
        out.degenerate = true;
        continue;
      }
      out.value(i, j) = Ac.row(i).dot(Bc.row(j)) / (an[i] * bn[j]);
    }
  }
  return out;
}

// Shortest augmenting path Hungarian method on costs = -weights.
std::vector<Index> max_weight_assignment(const Matrix& weights) {
  require(weights.rows() == weights.cols(), "assignment needs a square matrix");
  const Index n = weights.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> col_of_row(n, 0);
  for (Index j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

Assignment best_match(const Matrix& S, const Matrix& Y) {
  require(S.rows() == Y.rows() && S.cols() == Y.cols() && S.cols() >= 2,
          "best_match: S and Y must both be n x t with t >= 2");
  const Matrix corr = pearson_matrix(S, Y).value.cwiseAbs();
  Assignment out{max_weight_assignment(corr), Vector::Zero(S.rows())};
  for (Index i = 0; i < S.rows(); ++i) {
    const auto y = Y.row(out.permutation[i]);
    const double power = y.squaredNorm();
    out.scales[i] = power > 0.0 ? S.row(i).dot(y) / power : 0.0;
  }
  return out;
}

namespace {

double ratio_db(double signal, double residual) {
  if (residual <= 0.0) return signal > 0.0 ? kSinrCapDb : 0.0;
  return std::min(10.0 * std::log10(signal / residual), kSinrCapDb);
}

}  // namespace

EvalReport sinr_db(const Matrix& S, const Matrix& Y) {
  const Assignment match = best_match(S, Y);
  EvalReport report;
  report.permutation = match.permutation;
  report.scales = match.scales;
  report.per_source_snr_db.resize(S.rows());
  report.pearson = pearson_matrix(S, Y).value;
  double signal_total = 0.0, residual_total = 0.0;
  for (Index i = 0; i < S.rows(); ++i) {
    const double signal = S.row(i).squaredNorm();
    const double residual =
        (S.row(i) - match.scales[i] * Y.row(match.permutation[i])).squaredNorm();
    report.per_source_snr_db[i] = ratio_db(signal, residual);
    signal_total += signal;
    residual_total += residual;
  }
  report.overall_sinr_db = ratio_db(signal_total, residual_total);
  return report;
}

}  // namespace detmax
