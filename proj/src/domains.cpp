#include "detmax/domains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace detmax {

std::string_view to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::Antisparse: return "antisparse";
    case DomainKind::NonnegAntisparse: return "nonneg-antisparse";
    case DomainKind::Sparse: return "sparse";
    case DomainKind::NonnegSparse: return "nonneg-sparse";
    case DomainKind::UnitSimplex: return "simplex";
    case DomainKind::General: return "general";
  }
  return "unknown";
}

std::optional<DomainKind> parse_domain_kind(std::string_view name) {
  for (auto kind : {DomainKind::Antisparse, DomainKind::NonnegAntisparse,
                    DomainKind::Sparse, DomainKind::NonnegSparse,
                    DomainKind::UnitSimplex, DomainKind::General}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

SourceDomainSpec::SourceDomainSpec(Index n, DomainKind kind, std::vector<Index> nonneg,
                                   std::vector<std::vector<Index>> groups)
    : n_(n), kind_(kind), nonneg_(std::move(nonneg)), groups_(std::move(groups)) {
  require(n >= 1, "domain dimension must be positive");
  nonneg_mask_.assign(static_cast<std::size_t>(n), false);
  std::sort(nonneg_.begin(), nonneg_.end());
  for (Index i : nonneg_) {
    require(i >= 0 && i < n, "nonnegative index out of range");
    require(!nonneg_mask_[static_cast<std::size_t>(i)], "duplicate nonnegative index");
    nonneg_mask_[static_cast<std::size_t>(i)] = true;
  }
  for (Index i = 0; i < n; ++i) {
    if (!nonneg_mask_[static_cast<std::size_t>(i)]) signed_.push_back(i);
  }
  for (auto& group : groups_) {
    std::sort(group.begin(), group.end());
    require(std::adjacent_find(group.begin(), group.end()) == group.end(),
            "sparsity group has a repeated index");
    require(group.size() >= 2, "sparsity group needs at least two members");
    for (Index i : group) require(i >= 0 && i < n, "sparsity group index out of range");
  }
}

SourceDomainSpec SourceDomainSpec::antisparse(Index n) {
  return {n, DomainKind::Antisparse, {}, {}};
}

SourceDomainSpec SourceDomainSpec::nonneg_antisparse(Index n) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return {n, DomainKind::NonnegAntisparse, all, {}};
}

SourceDomainSpec SourceDomainSpec::sparse(Index n) {
  return {n, DomainKind::Sparse, {}, {}};
}

SourceDomainSpec SourceDomainSpec::nonneg_sparse(Index n) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return {n, DomainKind::NonnegSparse, all, {}};
}

SourceDomainSpec SourceDomainSpec::unit_simplex(Index n) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  return {n, DomainKind::UnitSimplex, all, {}};
}

SourceDomainSpec SourceDomainSpec::general(Index n, std::vector<Index> nonneg,
                                           std::vector<std::vector<Index>> groups) {
  return {n, DomainKind::General, std::move(nonneg), std::move(groups)};
}

SourceDomainSpec SourceDomainSpec::to_general() const {
  std::vector<std::vector<Index>> groups;
  std::vector<Index> all(static_cast<std::size_t>(n_));
  std::iota(all.begin(), all.end(), Index{0});
  switch (kind_) {
    case DomainKind::General:
      return *this;
    case DomainKind::Antisparse:
    case DomainKind::NonnegAntisparse:
      return general(n_, nonneg_, {});
    case DomainKind::Sparse:
    case DomainKind::NonnegSparse:
      // A one-element l1 bound is just the box bound.
      if (n_ >= 2) groups.push_back(all);
      return general(n_, nonneg_, groups);
    case DomainKind::UnitSimplex:
      break;
  }
  throw ContractViolation("the unit simplex has an equality constraint and no General form");
}

bool SourceDomainSpec::operator==(const SourceDomainSpec& other) const {
  return n_ == other.n_ && kind_ == other.kind_ && nonneg_ == other.nonneg_ &&
         groups_ == other.groups_;
}

namespace {

void check_dim(const SourceDomainSpec& spec, const Vector& v) {
  if (v.size() != spec.n()) {
    std::ostringstream msg;
    msg << "vector of length " << v.size() << " does not match domain dimension " << spec.n();
    throw ContractViolation(msg.str());
  }
}

bool box_ok(const SourceDomainSpec& spec, const Vector& s, double tol) {
  for (Index i = 0; i < s.size(); ++i) {
    const double lo = spec.is_nonneg(i) ? 0.0 : -1.0;
    if (s[i] < lo - tol || s[i] > 1.0 + tol) return false;
  }
  return true;
}

Vector clip_box(const SourceDomainSpec& spec, const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    out[i] = std::clamp(v[i], spec.is_nonneg(i) ? 0.0 : -1.0, 1.0);
  }
  return out;
}

double group_l1(const Vector& s, const std::vector<Index>& group) {
  double sum = 0.0;
  for (Index i : group) sum += std::abs(s[i]);
  return sum;
}

// Projection onto {s : ||s_J||_1 <= 1}, coordinates outside J untouched.
Vector project_group(const Vector& v, const std::vector<Index>& group) {
  Vector sub(static_cast<Index>(group.size()));
  for (std::size_t k = 0; k < group.size(); ++k) sub[static_cast<Index>(k)] = v[group[k]];
  if (sub.lpNorm<1>() <= 1.0) return v;
  const Vector projected = project_l1_ball(sub, 1.0);
  Vector out = v;
  for (std::size_t k = 0; k < group.size(); ++k) out[group[k]] = projected[static_cast<Index>(k)];
  return out;
}

Vector project_general(const SourceDomainSpec& spec, const Vector& v,
                       const ProjectionOptions& options) {
  if (spec.groups().empty()) return clip_box(spec, v);
  if (contains(spec, v, 0.0)) return v;

  const std::size_t sets = spec.groups().size() + 1;
  std::vector<Vector> increments(sets, Vector::Zero(v.size()));
  Vector x = v;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const Vector start = x;
    double moved = 0.0;  // x can stall for a sweep while the increments still change
    for (std::size_t k = 0; k < sets; ++k) {
      const Vector shifted = x + increments[k];
      const Vector next = k == 0 ? clip_box(spec, shifted)
                                 : project_group(shifted, spec.groups()[k - 1]);
      moved = std::max(moved, (shifted - next - increments[k]).lpNorm<Eigen::Infinity>());
      increments[k] = shifted - next;
      x = next;
    }
    if ((x - start).lpNorm<Eigen::Infinity>() <= options.residual &&
        moved <= options.residual &&
        contains(spec, x, options.residual)) {
      return x;
    }
  }
  std::ostringstream msg;
  msg << "alternating projection did not converge within " << options.max_sweeps << " sweeps";
  throw NonConvergenceError(msg.str(), x);
}

}  // namespace

bool contains(const SourceDomainSpec& spec, const Vector& s, double tol) {
  check_dim(spec, s);
  require(tol >= 0.0, "membership tolerance must be nonnegative");
  if (!s.allFinite()) return false;
  switch (spec.kind()) {
    case DomainKind::Antisparse:
    case DomainKind::NonnegAntisparse:
      return box_ok(spec, s, tol);
    case DomainKind::Sparse:
      return s.lpNorm<1>() <= 1.0 + tol;
    case DomainKind::NonnegSparse:
      return s.minCoeff() >= -tol && s.lpNorm<1>() <= 1.0 + tol;
    case DomainKind::UnitSimplex:
      return s.minCoeff() >= -tol && std::abs(s.sum() - 1.0) <= tol;
    case DomainKind::General:
      if (!box_ok(spec, s, tol)) return false;
      for (const auto& group : spec.groups()) {
        if (group_l1(s, group) > 1.0 + tol) return false;
      }
      return true;
  }
  return false;
}

Vector project_simplex(const Vector& v, double total) {
  // Sort-based threshold search (Held/Wolfe/Crowder; Duchi et al.).
  const Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - total) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Vector project_l1_ball(const Vector& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  const Vector magnitude = project_simplex(v.cwiseAbs(), radius);
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = v[i] < 0.0 ? -magnitude[i] : magnitude[i];
  return out;
}

Vector project_nonneg_l1_ball(const Vector& v, double radius) {
  Vector positive = v.cwiseMax(0.0);
  if (positive.sum() <= radius) return positive;
  return project_simplex(v, radius);
}

Vector project_euclidean(const SourceDomainSpec& spec, const Vector& v,
                         const ProjectionOptions& options) {
  check_dim(spec, v);
  switch (spec.kind()) {
    case DomainKind::Antisparse:
      return v.cwiseMax(-1.0).cwiseMin(1.0);
    case DomainKind::NonnegAntisparse:
      return v.cwiseMax(0.0).cwiseMin(1.0);
    case DomainKind::Sparse:
      return project_l1_ball(v);
    case DomainKind::NonnegSparse:
      return project_nonneg_l1_ball(v);
    case DomainKind::UnitSimplex:
      return project_simplex(v);
    case DomainKind::General:
      return project_general(spec, v, options);
  }
  return v;
}

void project_columns(const SourceDomainSpec& spec, Matrix& V, const ProjectionOptions& options) {
  require(V.rows() == spec.n(), "matrix rows do not match domain dimension");
  for (Index j = 0; j < V.cols(); ++j) {
    Vector column = V.col(j);
    V.col(j) = project_euclidean(spec, column, options);
  }
}

Matrix sample_uniform(const SourceDomainSpec& spec, Index count, Rng& rng,
                      const SamplingOptions& options) {
  require(count >= 1, "sample count must be positive");
  const Index n = spec.n();
  Matrix out(n, count);
  std::uniform_real_distribution<double> signed_unit(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  switch (spec.kind()) {
    case DomainKind::Antisparse:
      for (Index j = 0; j < count; ++j)
        for (Index i = 0; i < n; ++i) out(i, j) = signed_unit(rng);
      return out;
    case DomainKind::NonnegAntisparse:
      for (Index j = 0; j < count; ++j)
        for (Index i = 0; i < n; ++i) out(i, j) = unit(rng);
      return out;
    case DomainKind::Sparse:
    case DomainKind::NonnegSparse: {
      auto& draw = spec.kind() == DomainKind::Sparse ? signed_unit : unit;
      Vector v(n);
      for (Index j = 0; j < count; ++j) {
        for (Index i = 0; i < n; ++i) v[i] = draw(rng);
        out.col(j) = project_euclidean(spec, v);
      }
      return out;
    }
    case DomainKind::UnitSimplex: {
      std::exponential_distribution<double> expo(1.0);
      for (Index j = 0; j < count; ++j) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
          out(i, j) = expo(rng);
          total += out(i, j);
        }
        out.col(j) /= total;
      }
      return out;
    }
    case DomainKind::General: {
      const long cap = options.max_attempts_per_sample * static_cast<long>(count);
      long attempts = 0;
      Vector v(n);
      for (Index j = 0; j < count;) {
        if (attempts >= cap) {
          const double rate = static_cast<double>(j) / static_cast<double>(attempts);
          std::ostringstream msg;
          msg << "rejection sampler exceeded " << cap << " attempts; acceptance rate ~ " << rate;
          throw SamplingError(msg.str(), rate);
        }
        ++attempts;
        for (Index i = 0; i < n; ++i) v[i] = spec.is_nonneg(i) ? unit(rng) : signed_unit(rng);
        if (contains(spec, v, 0.0)) out.col(j++) = v;
      }
      return out;
    }
  }
  return out;
}

double mvie_radius(const SourceDomainSpec& spec) {
  switch (spec.kind()) {
    case DomainKind::Antisparse: return 1.0;
    case DomainKind::Sparse: return 1.0 / std::sqrt(static_cast<double>(spec.n()));
    default: break;
  }
  throw ContractViolation("scatter diagnostic supports only antisparse and sparse domains");
}

double scatter_diagnostic(const SourceDomainSpec& spec, const Matrix& S, Index directions,
                          Rng& rng) {
  const double radius = mvie_radius(spec);
  require(S.rows() == spec.n(), "sample matrix rows do not match domain dimension");
  require(S.cols() >= spec.n() + 1, "scatter diagnostic needs at least n+1 samples");
  require(directions >= 1, "need at least one direction");
  std::normal_distribution<double> normal(0.0, 1.0);
  double margin = std::numeric_limits<double>::infinity();
  Vector d(spec.n());
  for (Index k = 0; k < directions; ++k) {
    do {
      for (Index i = 0; i < d.size(); ++i) d[i] = normal(rng);
    } while (d.norm() == 0.0);
    d.normalize();
    const double support = (d.transpose() * S).maxCoeff();
    margin = std::min(margin, support - radius);
  }
  return margin;
}

}  // namespace detmax
