#ifndef DETMAX_METRICS_HPP
#define DETMAX_METRICS_HPP

#include <vector>

#include "detmax/common.hpp"

namespace detmax {

inline constexpr double kSinrCapDb = 150.0;

struct Assignment {
  std::vector<Index> permutation;  // source i is matched with output permutation[i]
  Vector scales;                   // alpha_i
};

struct EvalReport {
  std::vector<Index> permutation;
  Vector scales;
  Vector per_source_snr_db;
  double overall_sinr_db = 0.0;
  Matrix pearson;  // corr(s_i, y_j)
};

struct PearsonResult {
  Matrix value;
  bool degenerate = false;  // some row had zero variance; its entries are 0
};

/// Sample Pearson correlations between the rows of A and the rows of B.
PearsonResult pearson_matrix(const Matrix& A, const Matrix& B);

/// Maximum-weight perfect matching on a square weight matrix. Returns
/// col_of_row.
std::vector<Index> max_weight_assignment(const Matrix& weights);

Assignment best_match(const Matrix& S, const Matrix& Y);
EvalReport sinr_db(const Matrix& S, const Matrix& Y);

}  // namespace detmax

#endif  // DETMAX_METRICS_HPP
