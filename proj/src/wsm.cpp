#include "detmax/wsm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace detmax {

void WsmHyper::validate() const {
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(lambda_sm >= 0.0 && lambda_sm <= 1.0, "lambda_sm must lie in [0, 1]");
  require(forget_floor > 0.0 && forget_floor <= forget_nu,
          "forgetting schedule needs 0 < floor <= nu");
  require(mu_d1 >= 0.0 && mu_d2 >= 0.0, "gain learning rates must be nonnegative");
  require(d1_min > 0.0 && d1_min <= d1_max, "d1 range must be nonempty and positive");
  require(d2_min > 0.0 && d2_min <= d2_max, "d2 range must be nonempty and positive");
  require(tau_max >= 1, "tau_max must be at least 1");
  require(eps > 0.0, "eps must be positive");
  require(lr_base > 0.0 && lr_floor > 0.0 && lr_decay >= 0.0, "neural step schedule is invalid");
  require(hidden_clip > 0.0, "hidden clip level must be positive");
}

void WsmState::validate_shapes() const {
  const Index n = W_YH.rows();
  require(n >= 1, "state has no sources");
  require(W_HX.rows() == n, "W_HX must have n rows");
  require(W_YH.cols() == n, "W_YH must be square");
  require(M_H.rows() == n && M_H.cols() == n, "M_H must be n x n");
  require(M_Y.rows() == n && M_Y.cols() == n, "M_Y must be n x n");
  require(D1.size() == n && D2.size() == n, "gain vectors must have length n");
}

double gamma_sq_complement(const WsmHyper& hyper, std::uint64_t t) {
  require(t >= 1, "forgetting schedule is defined for t >= 1");
  const double decayed = hyper.forget_nu / (1.0 + std::log(1.0 + static_cast<double>(t)));
  return std::max(decayed, hyper.forget_floor);
}

double neural_step_size(const WsmHyper& hyper, int tau) {
  require(tau >= 0, "neural iteration index must be nonnegative");
  return std::max(hyper.lr_base / (1.0 + tau * hyper.lr_decay), hyper.lr_floor);
}

double output_drive_scale(const SourceDomainSpec& spec, const WsmHyper& hyper) {
  switch (spec.kind()) {
    case DomainKind::Antisparse:
    case DomainKind::NonnegAntisparse:
      return 1.0;
    case DomainKind::General:
      if (spec.groups().empty()) return 1.0;
      break;
    default:
      break;
  }
  return hyper.lambda_sm * (1.0 - hyper.beta);
}

Index inhibitory_count(const SourceDomainSpec& spec) {
  switch (spec.kind()) {
    case DomainKind::Sparse:
    case DomainKind::NonnegSparse:
    case DomainKind::UnitSimplex:
      return 1;
    case DomainKind::General:
      return static_cast<Index>(spec.groups().size());
    default:
      return 0;
  }
}

double online_cost(const WsmState& state, const Vector& x, const Vector& h, const Vector& y,
                   double beta) {
  const Vector d1h = state.D1.cwiseProduct(h);
  const Vector d2y = state.D2.cwiseProduct(y);
  const double c1 = 2.0 * d1h.dot(state.M_H * d1h) - 4.0 * d1h.dot(state.W_HX * x);
  const double c2 = 2.0 * d2y.dot(state.M_Y * d2y) - 4.0 * d2y.dot(state.W_YH * h) +
                    2.0 * h.dot(state.M_H * h);
  return beta * c1 + (1.0 - beta) * c2;
}

Vector online_cost_grad_h(const WsmState& state, const Vector& x, const Vector& h,
                          const Vector& y, double beta) {
  const Vector& D1 = state.D1;
  const Vector layer1 = D1.cwiseProduct(state.M_H * D1.cwiseProduct(h)) -
                        D1.cwiseProduct(state.W_HX * x);
  const Vector layer2 = state.M_H * h - state.W_YH.transpose() * state.D2.cwiseProduct(y);
  return 4.0 * (beta * layer1 + (1.0 - beta) * layer2);
}

Vector online_cost_grad_y(const WsmState& state, const Vector& h, const Vector& y, double beta) {
  const Vector& D2 = state.D2;
  return 4.0 * (1.0 - beta) *
         (D2.cwiseProduct(state.M_Y * D2.cwiseProduct(y)) - D2.cwiseProduct(state.W_YH * h));
}

namespace {

// Everything the inner loop needs that stays fixed within one sample.
struct SampleOperators {
  Matrix hidden_lateral;    // (1-beta) Mbar_H + beta D1 Mbar_H D1
  Vector input_drive;       // beta D1 W_HX x
  Matrix feedback;          // (1-beta) W_YH^T D2
  Matrix output_lateral;    // Mbar_Y D2
  Vector hidden_gain;       // lambda_sm Gamma_H ((1-beta) + beta D1^2)
  Vector gamma_y;
  double lambda_sm = 1.0;
  double output_scale = 1.0;
};

SampleOperators build_operators(const WsmState& state, const Vector& x, const WsmHyper& hyper,
                                double output_scale) {
  const Index n = state.n();
  const double beta = hyper.beta;
  SampleOperators ops;
  Matrix mh_bar = state.M_H;
  mh_bar.diagonal().setZero();
  ops.hidden_lateral.resize(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      ops.hidden_lateral(i, j) =
          mh_bar(i, j) * ((1.0 - beta) + beta * state.D1[i] * state.D1[j]);
  ops.input_drive = beta * state.D1.cwiseProduct(state.W_HX * x);
  ops.feedback = (1.0 - beta) * state.W_YH.transpose() * state.D2.asDiagonal();
  Matrix my_bar = state.M_Y;
  my_bar.diagonal().setZero();
  ops.output_lateral = my_bar * state.D2.asDiagonal();
  ops.hidden_gain = hyper.lambda_sm * state.M_H.diagonal().cwiseProduct(
                                          ((1.0 - beta) + beta * state.D1.array().square()).matrix());
  ops.gamma_y = state.M_Y.diagonal();
  ops.lambda_sm = hyper.lambda_sm;
  ops.output_scale = output_scale;
  return ops;
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

constexpr double kTinyGain = 1e-12;

Vector hidden_activation(const Vector& v, const Vector& gain, double clip) {
  Vector h(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    h[i] = std::clamp(v[i] / std::max(gain[i], kTinyGain), -clip, clip);
  }
  return h;
}

double relative_change(const Vector& next, const Vector& prev, double eps) {
  const double delta = (next - prev).norm();
  const double norm = next.norm();
  // Near the origin the relative test is meaningless; compare absolutely.
  if (norm < 1e-12) return delta <= eps ? 0.0 : delta;
  return delta / norm;
}

// Constraint violation driving each inhibitory neuron.
Vector inhibitory_drive(const SourceDomainSpec& spec, const Vector& y) {
  switch (spec.kind()) {
    case DomainKind::Sparse:
      return Vector::Constant(1, y.lpNorm<1>() - 1.0);
    case DomainKind::NonnegSparse:
    case DomainKind::UnitSimplex:
      return Vector::Constant(1, y.sum() - 1.0);
    case DomainKind::General: {
      Vector drive(static_cast<Index>(spec.groups().size()));
      for (std::size_t k = 0; k < spec.groups().size(); ++k) {
        double total = 0.0;
        for (Index i : spec.groups()[k]) total += spec.is_nonneg(i) ? y[i] : std::abs(y[i]);
        drive[static_cast<Index>(k)] = total - 1.0;
      }
      return drive;
    }
    default:
      return Vector(0);
  }
}

}  // namespace

Vector descent_direction_h(const WsmState& state, const Vector& x, const Vector& h,
                           const Vector& y, const WsmHyper& hyper) {
  state.validate_shapes();
  require(x.size() == state.m() && h.size() == state.n() && y.size() == state.n(),
          "descent_direction_h: shape mismatch");
  const SampleOperators ops = build_operators(state, x, hyper, 1.0);
  const Vector v = ops.hidden_gain.cwiseProduct(h);
  return -v - hyper.lambda_sm * (ops.hidden_lateral * h - ops.input_drive - ops.feedback * y);
}

Vector descent_direction_u(const WsmState& state, const Vector& h, const Vector& y,
                           const WsmHyper& hyper, double domain_scale) {
  (void)hyper;
  state.validate_shapes();
  require(h.size() == state.n() && y.size() == state.n(), "descent_direction_u: shape mismatch");
  Matrix my_bar = state.M_Y;
  my_bar.diagonal().setZero();
  const Vector d2y = state.D2.cwiseProduct(y);
  const Vector u = domain_scale * state.M_Y.diagonal().cwiseProduct(d2y);
  return -u + domain_scale * (state.W_YH * h - my_bar * d2y);
}

Vector apply_output_activation(const SourceDomainSpec& spec, const Vector& u,
                               const Vector& gamma_y, const Vector& d2, const WsmHyper& hyper,
                               const Vector& lagrange) {
  const Index n = spec.n();
  require(u.size() == n && gamma_y.size() == n && d2.size() == n,
          "apply_output_activation: shape mismatch");
  require(gamma_y.minCoeff() > 0.0 && d2.minCoeff() > 0.0,
          "output gains must be strictly positive");
  require(lagrange.size() == inhibitory_count(spec),
          "apply_output_activation: wrong number of inhibitory activations");
  const double scale = output_drive_scale(spec, hyper);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    const double z = u[i] / (scale * gamma_y[i] * d2[i]);
    switch (spec.kind()) {
      case DomainKind::Antisparse: y[i] = std::clamp(z, -1.0, 1.0); break;
      case DomainKind::NonnegAntisparse: y[i] = std::clamp(z, 0.0, 1.0); break;
      case DomainKind::Sparse: y[i] = soft_threshold(z, lagrange[0]); break;
      case DomainKind::NonnegSparse:
      case DomainKind::UnitSimplex: y[i] = std::max(z - lagrange[0], 0.0); break;
      case DomainKind::General: y[i] = z; break;
    }
  }
  if (spec.kind() != DomainKind::General) return y;

  Vector threshold = Vector::Zero(n);
  std::vector<bool> grouped(static_cast<std::size_t>(n), false);
  for (std::size_t k = 0; k < spec.groups().size(); ++k) {
    for (Index i : spec.groups()[k]) {
      threshold[i] += lagrange[static_cast<Index>(k)];
      grouped[static_cast<std::size_t>(i)] = true;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (grouped[static_cast<std::size_t>(i)]) {
      y[i] = spec.is_nonneg(i) ? std::max(y[i] - threshold[i], 0.0)
                               : soft_threshold(y[i], threshold[i]);
    } else {
      y[i] = std::clamp(y[i], spec.is_nonneg(i) ? 0.0 : -1.0, 1.0);
    }
  }
  return y;
}

NeuralTrace run_neural_dynamics(const WsmState& state, const Vector& x, const WsmHyper& hyper,
                                const SourceDomainSpec& spec, const NeuralTrace* warm) {
  state.validate_shapes();
  require(x.size() == state.m(), "input length does not match W_HX");
  require(spec.n() == state.n(), "domain dimension does not match the network");
  const Index n = state.n();
  const double scale = output_drive_scale(spec, hyper);
  const SampleOperators ops = build_operators(state, x, hyper, scale);
  const Index inhibitors = inhibitory_count(spec);
  const bool linear_inhibitor = spec.kind() == DomainKind::UnitSimplex;
  const Vector gamma_y = ops.gamma_y.cwiseMax(kTinyGain);
  Vector inhibitor_scale(inhibitors);
  for (Index k = 0; k < inhibitors; ++k) {
    const double size = spec.kind() == DomainKind::General
                            ? static_cast<double>(spec.groups()[static_cast<std::size_t>(k)].size())
                            : static_cast<double>(n);
    inhibitor_scale[k] = 1.0 / size;
  }

  NeuralTrace trace;
  Vector a = Vector::Zero(inhibitors);
  trace.v = Vector::Zero(n);
  trace.u = Vector::Zero(n);
  if (hyper.warm_start && warm != nullptr && warm->v.size() == n) {
    trace.v = warm->v;
    trace.u = warm->u;
    if (warm->lagrange.size() == inhibitors) a = warm->lagrange;
  }
  trace.lagrange = linear_inhibitor ? a : a.cwiseMax(0.0);
  trace.h = hidden_activation(trace.v, ops.hidden_gain, hyper.hidden_clip);
  trace.y = apply_output_activation(spec, trace.u, gamma_y, state.D2, hyper, trace.lagrange);

  for (int tau = 0; tau < hyper.tau_max; ++tau) {
    const double step = neural_step_size(hyper, tau);

    const Vector v_prev = trace.v;
    const Vector dv = -trace.v - ops.lambda_sm * (ops.hidden_lateral * trace.h -
                                                  ops.input_drive - ops.feedback * trace.y);
    trace.v += step * dv;
    trace.h = hidden_activation(trace.v, ops.hidden_gain, hyper.hidden_clip);

    const Vector u_prev = trace.u;
    const Vector du =
        -trace.u + scale * (state.W_YH * trace.h - ops.output_lateral * trace.y);
    trace.u += step * du;
    trace.y = apply_output_activation(spec, trace.u, gamma_y, state.D2, hyper, trace.lagrange);

    if (inhibitors > 0) {
      const Vector drive = inhibitory_drive(spec, trace.y);
      // Each inhibitor sums |y| over its group, so its loop gain grows with
      // the group size; scaling the step keeps it from ringing.
      if (linear_inhibitor) {
        a += step * inhibitor_scale.cwiseProduct(drive);
      } else {
        a += step * inhibitor_scale.cwiseProduct(drive + trace.lagrange - a);
      }
      trace.lagrange = linear_inhibitor ? a : a.cwiseMax(0.0);
    }

    trace.iters = tau + 1;
    if (!trace.v.allFinite() || !trace.u.allFinite() || !a.allFinite()) {
      std::ostringstream msg;
      msg << "neural dynamics produced non-finite values at iteration " << tau + 1;
      throw DivergenceError(msg.str(), tau + 1);
    }
    if (relative_change(trace.v, v_prev, hyper.eps) <= hyper.eps &&
        relative_change(trace.u, u_prev, hyper.eps) <= hyper.eps) {
      trace.converged = true;
      break;
    }
  }

  if (!contains(spec, trace.y, kDefaultMembershipTol)) {
    trace.y = project_euclidean(spec, trace.y);
  }
  return trace;
}

namespace {

// One step of size mu down the gain gradient, never moving D by more than its
// own magnitude in a single sample.
double gain_step(double d, double grad, double mu, double lo, double hi) {
  const double delta = std::clamp(mu * grad, -d, d);
  return std::clamp(d - delta, lo, hi);
}

}  // namespace

void update_gains(WsmState& state, const WsmHyper& hyper) {
  const Index n = state.n();
  const double lam = hyper.lambda_sm;
  const double beta = hyper.beta;
  for (Index i = 0; i < n; ++i) {
    if (hyper.mu_d1 > 0.0) {
      const double recurrent = state.M_H.row(i).array().square().matrix().dot(state.D1);
      const double feedforward = state.W_HX.row(i).squaredNorm();
      const double grad = lam * beta * (recurrent - feedforward) + (1.0 - lam) / state.D1[i];
      state.D1[i] = gain_step(state.D1[i], grad, hyper.mu_d1, hyper.d1_min, hyper.d1_max);
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (hyper.mu_d2 > 0.0) {
      const double recurrent = state.M_Y.row(i).array().square().matrix().dot(state.D2);
      const double feedforward = state.W_YH.row(i).squaredNorm();
      const double grad =
          lam * (1.0 - beta) * (recurrent - feedforward) + (1.0 - lam) / state.D2[i];
      state.D2[i] = gain_step(state.D2[i], grad, hyper.mu_d2, hyper.d2_min, hyper.d2_max);
    }
  }
}

void update_synapses(WsmState& state, const Vector& h, const Vector& x, const Vector& y,
                     double gamma_sq) {
  require(gamma_sq > 0.0 && gamma_sq < 1.0, "gamma^2 must lie in (0, 1)");
  const double fresh = 1.0 - gamma_sq;
  state.M_H = gamma_sq * state.M_H + fresh * h * h.transpose();
  state.M_Y = gamma_sq * state.M_Y + fresh * y * y.transpose();
  state.W_HX = gamma_sq * state.W_HX + fresh * h * x.transpose();
  state.W_YH = gamma_sq * state.W_YH + fresh * y * h.transpose();
  state.M_H = 0.5 * (state.M_H + state.M_H.transpose()).eval();
  state.M_Y = 0.5 * (state.M_Y + state.M_Y.transpose()).eval();
}

TrainResult train_online(const Matrix& X, const SourceDomainSpec& spec, const WsmHyper& hyper,
                         const WsmState& initial, const TrainOptions& options) {
  hyper.validate();
  initial.validate_shapes();
  require(X.rows() == initial.m(), "input dimension does not match W_HX");
  require(spec.n() == initial.n(), "domain dimension does not match the network");
  require(X.allFinite(), "training data must be finite");

  TrainResult result{initial, Matrix::Zero(initial.n(), X.cols()), {}};
  WsmState& state = result.state;
  result.diagnostics.neural_iters.reserve(static_cast<std::size_t>(X.cols()));
  NeuralTrace previous;

  for (Index j = 0; j < X.cols(); ++j) {
    const std::uint64_t t = state.t + 1;
    const double fresh = gamma_sq_complement(hyper, t);
    const Vector x = X.col(j);
    NeuralTrace trace;
    try {
      trace = run_neural_dynamics(state, x, hyper, spec, &previous);
    } catch (const DivergenceError& err) {
      if (!options.skip_divergent) {
        std::ostringstream msg;
        msg << err.what() << " (sample " << t << ")";
        throw DivergenceError(msg.str(), err.iteration(), static_cast<long>(t));
      }
      ++result.diagnostics.skipped;
      state.t = t;
      continue;
    }
    result.Y.col(j) = trace.y;
    result.diagnostics.neural_iters.push_back(trace.iters);
    if (!trace.converged) ++result.diagnostics.nonconverged;

    update_synapses(state, trace.h, x, trace.y, 1.0 - fresh);
    update_gains(state, hyper);
    state.t = t;
    previous = std::move(trace);

    const bool last = j + 1 == X.cols();
    if (options.on_snapshot && options.snapshot_period > 0 &&
        ((j + 1) % options.snapshot_period == 0 || last)) {
      const WsmState snapshot = state;
      options.on_snapshot(static_cast<std::uint64_t>(j + 1), snapshot, result.Y);
    }
  }
  return result;
}

}  // namespace detmax
