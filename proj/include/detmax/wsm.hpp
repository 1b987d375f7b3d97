#ifndef DETMAX_WSM_HPP
#define DETMAX_WSM_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "detmax/common.hpp"
#include "detmax/domains.hpp"

namespace detmax {

/// Hyperparameters of the online weighted-similarity-matching network.
struct WsmHyper {
  double beta = 0.5;         // layer-1 vs layer-2 similarity weight
  double lambda_sm = 1.0 - 1e-5;  // similarity cost vs log-gain objective
  double forget_nu = 0.1;    // 1 - gamma^2 = max(nu / (1 + ln(1 + t)), floor)
  double forget_floor = 1e-3;
  double mu_d1 = 1.0;        // gain learning rates (per-sample step)
  double mu_d2 = 1e-2;
  double d1_min = 0.2, d1_max = 1e6;
  double d2_min = 0.2, d2_max = 5.0;
  int tau_max = 500;         // neural iteration cap per sample
  double eps = 1e-6;         // relative-change stopping tolerance
  double lr_base = 0.75;     // neural step: max(base / (1 + tau * decay), floor)
  double lr_decay = 0.005;
  double lr_floor = 0.05;
  double hidden_clip = 10.0; // A in sigma_A
  bool warm_start = false;   // keep v, u, a between samples instead of zeroing

  /// Throws ContractViolation on empty ranges or out-of-range weights.
  void validate() const;
  bool operator==(const WsmHyper&) const = default;
};

/// Learned quantities of the two-layer network.
struct WsmState {
  Matrix W_HX;  // n x m feedforward, layer 1
  Matrix W_YH;  // n x n feedforward, layer 2
  Matrix M_H;   // n x n hidden lateral (symmetric)
  Matrix M_Y;   // n x n output lateral (symmetric)
  Vector D1;    // layer-1 inner-product weights (positive)
  Vector D2;    // layer-2 inner-product weights (positive)
  std::uint64_t t = 0;  // samples consumed

  Index n() const { return W_YH.rows(); }
  Index m() const { return W_HX.cols(); }
  void validate_shapes() const;
};

/// Per-sample result of the neural dynamics.
struct NeuralTrace {
  Vector h, y, v, u;
  Vector lagrange;   // inhibitory activations, one per l1 constraint
  int iters = 0;
  bool converged = false;
};

/// 1 - gamma^2 at sample t (t >= 1).
double gamma_sq_complement(const WsmHyper& hyper, std::uint64_t t);
/// Euler step of the neural dynamics at inner iteration tau (tau >= 0).
double neural_step_size(const WsmHyper& hyper, int tau);

/// Scale applied to the output-layer drive: 1 for box-only domains,
/// lambda_sm (1 - beta) whenever the domain carries l1 or simplex constraints.
double output_drive_scale(const SourceDomainSpec& spec, const WsmHyper& hyper);

/// Online cost C(h, y) restricted to the terms that depend on the current
/// sample.
double online_cost(const WsmState& state, const Vector& x, const Vector& h, const Vector& y,
                   double beta);
/// Analytic gradients of online_cost.
Vector online_cost_grad_h(const WsmState& state, const Vector& x, const Vector& h,
                          const Vector& y, double beta);
Vector online_cost_grad_y(const WsmState& state, const Vector& h, const Vector& y, double beta);

/// Right-hand side of the hidden voltage dynamics evaluated at the voltage
/// consistent with h, v = lambda_sm ((1-beta) Gamma_H + beta D1 Gamma_H D1) h.
/// Equals -lambda_sm * (1/4) grad_h C.
Vector descent_direction_h(const WsmState& state, const Vector& x, const Vector& h,
                           const Vector& y, const WsmHyper& hyper);

/// Right-hand side of the output dynamics at u = scale * Gamma_Y D2 y:
/// scale * (W_YH h - M_Y D2 y).
Vector descent_direction_u(const WsmState& state, const Vector& h, const Vector& y,
                           const WsmHyper& hyper, double domain_scale);

/// Output nonlinearity for each domain kind. `lagrange` holds the current
/// inhibitory activations (empty for box-only domains).
Vector apply_output_activation(const SourceDomainSpec& spec, const Vector& u,
                               const Vector& gamma_y, const Vector& d2, const WsmHyper& hyper,
                               const Vector& lagrange);

/// Number of inhibitory neurons the domain needs.
Index inhibitory_count(const SourceDomainSpec& spec);

/// Euler-integrates the hidden, output and inhibitory neurons for one input.
/// The emitted y is projected onto the domain if the dynamics stopped short
/// of feasibility. `warm` seeds v, u and the inhibitory states when
/// hyper.warm_start is set.
NeuralTrace run_neural_dynamics(const WsmState& state, const Vector& x, const WsmHyper& hyper,
                                const SourceDomainSpec& spec, const NeuralTrace* warm = nullptr);

/// One gradient step per sample on D1 and D2 (rate mu_d1, mu_d2), with the
/// step bounded by the current gain and the result clipped into range.
void update_gains(WsmState& state, const WsmHyper& hyper);

/// Exponentially weighted Hebbian/anti-Hebbian updates of all four synaptic
/// matrices. gamma_sq must lie in (0, 1).
void update_synapses(WsmState& state, const Vector& h, const Vector& x, const Vector& y,
                     double gamma_sq);

struct TrainDiagnostics {
  std::vector<int> neural_iters;        // per processed sample
  long nonconverged = 0;
  long skipped = 0;                     // samples dropped by the skip policy
};

struct TrainOptions {
  /// Called every `snapshot_period` samples (and after the last one) with the
  /// number of processed samples and an immutable copy of the state.
  std::function<void(std::uint64_t processed, const WsmState& snapshot, const Matrix& Y)>
      on_snapshot;
  Index snapshot_period = 0;  // 0 disables snapshots
  bool skip_divergent = false;
};

struct TrainResult {
  WsmState state;
  Matrix Y;
  TrainDiagnostics diagnostics;
};

/// Runs the online network over the columns of X, starting from `initial`.
/// Samples are numbered from initial.t + 1 so a checkpointed state resumes
/// exactly where it stopped.
TrainResult train_online(const Matrix& X, const SourceDomainSpec& spec, const WsmHyper& hyper,
                         const WsmState& initial, const TrainOptions& options = {});

}  // namespace detmax

#endif  // DETMAX_WSM_HPP
