#ifndef DETMAX_DOMAINS_HPP
#define DETMAX_DOMAINS_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "detmax/common.hpp"

namespace detmax {

enum class DomainKind {
  Antisparse,        // unit l-inf ball
  NonnegAntisparse,  // [0,1]^n
  Sparse,            // unit l1 ball
  NonnegSparse,      // l1 ball intersected with the nonnegative orthant
  UnitSimplex,       // s >= 0, sum(s) = 1
  General,           // box bounds per coordinate + l1 bounds on index groups
};

std::string_view to_string(DomainKind kind);
/// Accepts the canonical names ("antisparse", "nonneg-antisparse", "sparse",
/// "nonneg-sparse", "simplex", "general").
std::optional<DomainKind> parse_domain_kind(std::string_view name);

/// Describes a source polytope. Index sets are 0-based here; the config layer
/// converts from the 1-based lists users write.
class SourceDomainSpec {
 public:
  static SourceDomainSpec antisparse(Index n);
  static SourceDomainSpec nonneg_antisparse(Index n);
  static SourceDomainSpec sparse(Index n);
  static SourceDomainSpec nonneg_sparse(Index n);
  static SourceDomainSpec unit_simplex(Index n);
  /// `nonneg` lists the nonnegative coordinates; every other coordinate is
  /// signed. Groups must have at least two distinct in-range members.
  static SourceDomainSpec general(Index n, std::vector<Index> nonneg,
                                  std::vector<std::vector<Index>> groups);

  Index n() const { return n_; }
  DomainKind kind() const { return kind_; }
  const std::vector<Index>& signed_set() const { return signed_; }
  const std::vector<Index>& nonneg_set() const { return nonneg_; }
  const std::vector<std::vector<Index>>& groups() const { return groups_; }

  bool is_nonneg(Index i) const { return nonneg_mask_[static_cast<std::size_t>(i)]; }

  /// Rewrites a named kind as an equivalent General spec. UnitSimplex has an
  /// equality constraint and is rejected.
  SourceDomainSpec to_general() const;

  bool operator==(const SourceDomainSpec& other) const;

 private:
  SourceDomainSpec(Index n, DomainKind kind, std::vector<Index> nonneg,
                   std::vector<std::vector<Index>> groups);

  Index n_ = 0;
  DomainKind kind_ = DomainKind::Antisparse;
  std::vector<Index> signed_;
  std::vector<Index> nonneg_;
  std::vector<std::vector<Index>> groups_;
  std::vector<bool> nonneg_mask_;
};

inline constexpr double kDefaultMembershipTol = 1e-9;

bool contains(const SourceDomainSpec& spec, const Vector& s, double tol);

struct ProjectionOptions {
  int max_sweeps = 500;     // General kind only
  double residual = 1e-9;   // General kind only
};

/// Euclidean projection onto the domain. Named kinds are exact; General uses
/// Dykstra's alternating projections over the box and every group constraint.
Vector project_euclidean(const SourceDomainSpec& spec, const Vector& v,
                         const ProjectionOptions& options = {});

/// Projects every column of `V` in place.
void project_columns(const SourceDomainSpec& spec, Matrix& V,
                     const ProjectionOptions& options = {});

// Exact projections used by the domain code and reused by the batch fits.
Vector project_l1_ball(const Vector& v, double radius = 1.0);
Vector project_simplex(const Vector& v, double total = 1.0);
Vector project_nonneg_l1_ball(const Vector& v, double radius = 1.0);

struct SamplingOptions {
  long max_attempts_per_sample = 10000;  // General rejection sampler
};

/// Draws `count` columns from the domain. l-inf kinds are exactly uniform,
/// l1 kinds follow the uniform-cube-then-project recipe, the simplex is flat
/// Dirichlet and General uses rejection from the coordinate box.
Matrix sample_uniform(const SourceDomainSpec& spec, Index count, Rng& rng,
                      const SamplingOptions& options = {});

/// Radius of the maximum-volume inscribed ball for the l-inf (1) and l1
/// (1/sqrt(n)) balls.
double mvie_radius(const SourceDomainSpec& spec);

/// min over random unit directions d of (max_j <d, s_j> - r). A positive
/// value is necessary (never sufficient) evidence that the columns of S are
/// sufficiently scattered.
double scatter_diagnostic(const SourceDomainSpec& spec, const Matrix& S,
                          Index directions, Rng& rng);

}  // namespace detmax

#endif  // DETMAX_DOMAINS_HPP
