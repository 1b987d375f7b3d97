#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "detmax/presets.hpp"
#include "detmax/synth.hpp"
#include "detmax/wsm.hpp"

using namespace detmax;

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) M(i, j) = g(rng);
  return M;
}

Vector positive(Index n, Rng& rng, double lo = 0.3, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// A state whose lateral matrices are sample correlations, as they are after
// training, so both layers are positive definite.
WsmState random_state(Index n, Index m, Rng& rng) {
  WsmState s;
  const Matrix H = gaussian(n, 40, rng) / std::sqrt(40.0);
  const Matrix Y = gaussian(n, 40, rng) / std::sqrt(40.0);
  s.M_H = H * H.transpose();
  s.M_Y = Y * Y.transpose();
  s.W_HX = gaussian(n, m, rng) * 0.3;
  s.W_YH = gaussian(n, n, rng) * 0.3;
  s.D1 = positive(n, rng);
  s.D2 = positive(n, rng);
  return s;
}

Matrix random_orthogonal(Index n, Rng& rng) {
  return Eigen::HouseholderQR<Matrix>(gaussian(n, n, rng)).householderQ();
}

}  // namespace

TEST_CASE("forgetting schedule and neural step") {
  WsmHyper h;
  h.forget_nu = 0.25;
  h.forget_floor = 1e-3;
  CHECK(gamma_sq_complement(h, 1) == doctest::Approx(0.25 / (1.0 + std::log(2.0))));
  CHECK(gamma_sq_complement(h, 100) == doctest::Approx(0.25 / (1.0 + std::log(101.0))));
  h.forget_floor = 0.05;
  CHECK(gamma_sq_complement(h, 100000) == 0.05);
  h.lr_base = 0.75;
  h.lr_decay = 0.005;
  h.lr_floor = 0.05;
  CHECK(neural_step_size(h, 0) == doctest::Approx(0.75));
  CHECK(neural_step_size(h, 200) == doctest::Approx(0.375));
  CHECK(neural_step_size(h, 100000) == 0.05);
}

TEST_CASE("cost gradients match central differences") {
  Rng rng(31);
  int worst_case = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 3, m = n + 2;
    const WsmState s = random_state(n, m, rng);
    const Vector x = gaussian(m, 1, rng).col(0);
    const Vector h = gaussian(n, 1, rng).col(0);
    const Vector y = gaussian(n, 1, rng).col(0);
    const double beta = 0.2 + 0.6 * (trial % 5) / 4.0;
    const Vector gh = online_cost_grad_h(s, x, h, y, beta);
    const Vector gy = online_cost_grad_y(s, h, y, beta);
    Vector fh(n), fy(n);
    const double e = 1e-6;
    for (Index i = 0; i < n; ++i) {
      Vector hp = h, hm = h, yp = y, ym = y;
      hp[i] += e, hm[i] -= e, yp[i] += e, ym[i] -= e;
      fh[i] = (online_cost(s, x, hp, y, beta) - online_cost(s, x, hm, y, beta)) / (2 * e);
      fy[i] = (online_cost(s, x, h, yp, beta) - online_cost(s, x, h, ym, beta)) / (2 * e);
    }
    const double rel = std::max((gh - fh).norm() / gh.norm(), (gy - fy).norm() / gy.norm());
    if (rel > worst) worst = rel, worst_case = trial;
  }
  CAPTURE(worst_case);
  CHECK(worst <= 1e-5);
}

TEST_CASE("voltage dynamics are the scaled negative cost gradient") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const WsmState s = random_state(3, 5, rng);
    WsmHyper hyper;
    hyper.beta = 0.3 + 0.02 * trial;
    hyper.lambda_sm = 0.9;
    const Vector x = gaussian(5, 1, rng).col(0);
    const Vector h = gaussian(3, 1, rng).col(0);
    const Vector y = gaussian(3, 1, rng).col(0);
    const Vector dv = descent_direction_h(s, x, h, y, hyper);
    const Vector expect_h = -0.25 * hyper.lambda_sm * online_cost_grad_h(s, x, h, y, hyper.beta);
    CHECK((dv - expect_h).norm() <= 1e-12 * (1.0 + expect_h.norm()));

    const double scale = 0.7;
    const Vector du = descent_direction_u(s, h, y, hyper, scale);
    const Vector gy = online_cost_grad_y(s, h, y, hyper.beta);
    const Vector expect_u =
        -scale / (4.0 * (1.0 - hyper.beta)) * gy.cwiseQuotient(s.D2);
    CHECK((du - expect_u).norm() <= 1e-12 * (1.0 + expect_u.norm()));
  }
}

TEST_CASE("box-domain dynamics settle on the constrained minimizer") {
  // Oracle: projected gradient descent on C(h, y) with y kept in the box.
  Rng rng(33);
  for (const auto& spec : {SourceDomainSpec::antisparse(3), SourceDomainSpec::nonneg_antisparse(3)}) {
    for (int trial = 0; trial < 5; ++trial) {
      WsmState s = random_state(3, 5, rng);
      s.M_H += 0.5 * Matrix::Identity(3, 3);
      s.M_Y += 0.5 * Matrix::Identity(3, 3);
      WsmHyper hyper;
      hyper.lambda_sm = 1.0;
      hyper.tau_max = 20000;
      hyper.eps = 1e-12;
      hyper.lr_base = hyper.lr_floor = 0.2;
      hyper.lr_decay = 0.0;
      hyper.hidden_clip = 1e6;
      const Vector x = gaussian(5, 1, rng).col(0);
      const NeuralTrace tr = run_neural_dynamics(s, x, hyper, spec);
      REQUIRE(tr.converged);

      Vector h = Vector::Zero(3), y = Vector::Zero(3);
      for (int it = 0; it < 200000; ++it) {
        h -= 0.01 * online_cost_grad_h(s, x, h, y, hyper.beta);
        y -= 0.01 * online_cost_grad_y(s, h, y, hyper.beta);
        y = project_euclidean(spec, y);
      }
      CHECK((tr.y - y).norm() <= 1e-5);
      CHECK((tr.h - h).norm() <= 1e-5);
    }
  }
}

TEST_CASE("mixed polytope output matches a per-coordinate proximal grid search") {
  // Groups {1,2} and {2,3} (1-based), coordinate 3 nonnegative: the shared
  // coordinate is thresholded by the sum of both multipliers.
  const SourceDomainSpec spec = SourceDomainSpec::general(3, {2}, {{0, 1}, {1, 2}});
  WsmHyper hyper;
  const double scale = output_drive_scale(spec, hyper);
  Rng rng(34);
  std::uniform_real_distribution<double> uz(-2.0, 2.0), ul(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Vector z(3), lam(2);
    z << uz(rng), uz(rng), uz(rng);
    lam << ul(rng), ul(rng);
    const Vector ones = Vector::Ones(3);
    const Vector y = apply_output_activation(spec, scale * z, ones, ones, hyper, lam);
    const double weight[3] = {lam[0], lam[0] + lam[1], lam[1]};
    for (Index i = 0; i < 3; ++i) {
      double best = 0.0, best_f = 1e300;
      for (int k = -3000; k <= 3000; ++k) {
        const double q = k * 1e-3;
        if (i == 2 && q < 0.0) continue;
        const double f = 0.5 * (q - z[i]) * (q - z[i]) + weight[i] * std::abs(q);
        if (f < best_f) best_f = f, best = q;
      }
      CHECK(std::abs(y[i] - best) <= 2e-3);
    }
  }
}

TEST_CASE("synaptic recursion equals the closed-form weighted sum") {
  Rng rng(35);
  WsmState s = random_state(3, 4, rng);
  const WsmState s0 = s;
  const double g2 = 0.93;
  const int T = 60;
  Matrix H = gaussian(3, T, rng), X = gaussian(4, T, rng), Y = gaussian(3, T, rng);
  for (int k = 0; k < T; ++k) update_synapses(s, H.col(k), X.col(k), Y.col(k), g2);

  Matrix mh = std::pow(g2, T) * s0.M_H, my = std::pow(g2, T) * s0.M_Y;
  Matrix whx = std::pow(g2, T) * s0.W_HX, wyh = std::pow(g2, T) * s0.W_YH;
  for (int k = 0; k < T; ++k) {
    const double w = (1.0 - g2) * std::pow(g2, T - 1 - k);
    mh += w * H.col(k) * H.col(k).transpose();
    my += w * Y.col(k) * Y.col(k).transpose();
    whx += w * H.col(k) * X.col(k).transpose();
    wyh += w * Y.col(k) * H.col(k).transpose();
  }
  CHECK((s.M_H - mh).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((s.M_Y - my).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((s.W_HX - whx).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((s.W_YH - wyh).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_THROWS_AS(update_synapses(s, H.col(0), X.col(0), Y.col(0), 1.0), ContractViolation);
}

TEST_CASE("gain updates follow the energy balance") {
  WsmHyper h;
  h.lambda_sm = 1.0;
  h.mu_d1 = h.mu_d2 = 0.1;
  h.d1_min = h.d2_min = 1e-3;
  h.d1_max = h.d2_max = 1e3;
  WsmState s;
  s.D1 = Vector::Ones(2);
  s.D2 = Vector::Ones(2);
  s.M_H = Matrix::Identity(2, 2);
  s.M_Y = Matrix::Identity(2, 2);
  s.W_YH = Matrix::Identity(2, 2);
  s.W_HX = Matrix::Zero(2, 3);
  s.W_HX(0, 0) = 1.0;  // balanced row: recurrent energy 1, feedforward 1
  s.W_HX(1, 0) = 0.5;  // recurrent energy exceeds feedforward
  update_gains(s, h);
  CHECK(s.D1[0] == doctest::Approx(1.0));
  CHECK(s.D1[1] < 1.0);  // the neuron's gain 1/D rises
  CHECK(s.D2.isOnes());
}

TEST_CASE("gains stay positive and inside their ranges") {
  Rng rng(36);
  WsmHyper h;
  h.mu_d1 = 50.0;
  h.mu_d2 = 50.0;
  h.lambda_sm = 0.5;
  h.d1_min = 0.2, h.d1_max = 4.0;
  h.d2_min = 0.5, h.d2_max = 2.0;
  for (int trial = 0; trial < 200; ++trial) {
    WsmState s = random_state(3, 4, rng);
    s.W_HX *= 5.0 * (trial % 3);
    s.D1 = s.D1.cwiseMax(0.2).cwiseMin(4.0);
    s.D2 = s.D2.cwiseMax(0.5).cwiseMin(2.0);
    update_gains(s, h);
    CHECK(s.D1.minCoeff() >= 0.2);
    CHECK(s.D1.maxCoeff() <= 4.0);
    CHECK(s.D2.minCoeff() >= 0.5);
    CHECK(s.D2.maxCoeff() <= 2.0);
  }
}

TEST_CASE("determinant identity behind the log-gain objective") {
  Rng rng(37);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 4, m = n + 1 + trial % 3;
    const Vector d1 = positive(n, rng, 0.1, 10.0), d2 = positive(n, rng, 0.1, 10.0);
    Eigen::JacobiSVD<Matrix> svd(gaussian(m, n, rng), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sigma(n);
    for (Index i = 0; i < n; ++i) sigma[i] = u(rng);
    const Matrix UA = svd.matrixU(), VA = svd.matrixV();
    const Matrix theta1 = UA * random_orthogonal(n, rng);  // spans the range of A
    const Matrix theta2 = random_orthogonal(n, rng);
    const Matrix G = d2.cwiseInverse().cwiseSqrt().asDiagonal() * theta2 *
                     d1.cwiseInverse().cwiseSqrt().asDiagonal() * theta1.transpose() * UA *
                     sigma.asDiagonal() * VA.transpose();
    const double lhs = 2.0 * std::log(std::abs(G.determinant()));
    const double rhs = -d1.array().log().sum() - d2.array().log().sum() +
                       2.0 * sigma.array().log().sum();
    CHECK(std::abs(lhs - rhs) <= 1e-8);
  }
}

TEST_CASE("outputs are feasible for every domain") {
  Rng rng(38);
  for (const std::string name : {"sparse", "nonneg-sparse", "simplex", "mixed-d6",
                                 "mixed-antisparse", "mixed-sparse-nnanti",
                                 "nonneg-antisparse-copula"}) {
    CAPTURE(name);
    const WsmPreset p = find_preset(name);
    const Index n = p.domain.n(), m = p.m;
    const Matrix S = sample_uniform(p.domain, 600, rng);
    const Matrix A = random_mixing_matrix(m, n, rng);
    const MixtureDataset d = mix_and_corrupt(S, A, 30.0, rng);
    WsmHyper h = p.hyper;
    h.tau_max = 100;  // feasibility must not depend on convergence
    const TrainResult r = train_online(d.X, p.domain, h, initial_state(p.init, n, m, rng));
    for (Index j = 0; j < r.Y.cols(); ++j) CHECK(contains(p.domain, r.Y.col(j), 1e-6));
    CHECK(r.state.D1.minCoeff() >= h.d1_min);
    CHECK(r.state.D2.maxCoeff() <= h.d2_max);
  }
}

TEST_CASE("training is deterministic and resumes exactly") {
  const WsmPreset p = find_preset("sparse");
  Rng rng(39);
  const Matrix S = sample_uniform(p.domain, 1200, rng);
  const MixtureDataset d = mix_and_corrupt(S, random_mixing_matrix(10, 5, rng), 30.0, rng);
  Rng r1(5), r2(5);
  const WsmState init = initial_state(p.init, 5, 10, r1);
  CHECK(init.W_HX == initial_state(p.init, 5, 10, r2).W_HX);
  CHECK(std::abs(init.W_HX.row(0).norm() - 0.0033) < 1e-15);

  const TrainResult full = train_online(d.X, p.domain, p.hyper, init);
  const TrainResult again = train_online(d.X, p.domain, p.hyper, init);
  CHECK(full.Y == again.Y);

  const TrainResult first = train_online(d.X.leftCols(500), p.domain, p.hyper, init);
  const TrainResult rest = train_online(d.X.rightCols(700), p.domain, p.hyper, first.state);
  CHECK(rest.state.t == 1200);
  CHECK(rest.state.W_HX == full.state.W_HX);
  CHECK(rest.state.D1 == full.state.D1);
  CHECK(rest.Y == full.Y.rightCols(700));
}

TEST_CASE("snapshots arrive on schedule") {
  const WsmPreset p = find_preset("nonneg-antisparse-copula");
  Rng rng(40);
  const Matrix S = sample_uniform(p.domain, 250, rng);
  const MixtureDataset d = mix_and_corrupt(S, random_mixing_matrix(10, 5, rng), 30.0, rng);
  std::vector<std::uint64_t> seen;
  TrainOptions o;
  o.snapshot_period = 100;
  o.on_snapshot = [&](std::uint64_t k, const WsmState&, const Matrix&) { seen.push_back(k); };
  train_online(d.X, p.domain, p.hyper, initial_state(p.init, 5, 10, rng), o);
  CHECK(seen == std::vector<std::uint64_t>{100, 200, 250});
}

TEST_CASE("non-finite data and bad hyperparameters are rejected") {
  const WsmPreset p = find_preset("sparse");
  Rng rng(41);
  Matrix X = gaussian(10, 5, rng);
  X(3, 2) = std::nan("");
  CHECK_THROWS_AS(train_online(X, p.domain, p.hyper, initial_state(p.init, 5, 10, rng)),
                  ContractViolation);
  WsmHyper h = p.hyper;
  h.d1_min = 2.0, h.d1_max = 1.0;
  CHECK_THROWS_AS(h.validate(), ContractViolation);
}

TEST_CASE("diverging dynamics raise with the sample index") {
  const WsmPreset p = find_preset("nonneg-antisparse-copula");
  Rng rng(42);
  WsmState s = initial_state(p.init, 5, 10, rng);
  s.M_H(0, 1) = s.M_H(1, 0) = 1e308;
  const Matrix X = gaussian(10, 3, rng);
  try {
    train_online(X, p.domain, p.hyper, s);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.sample() == 1);
  }
  TrainOptions skip;
  skip.skip_divergent = true;
  const TrainResult r = train_online(X, p.domain, p.hyper, s, skip);
  CHECK(r.diagnostics.skipped == 3);
}

TEST_CASE("scalar network tracks a uniform source") {
  const auto spec = SourceDomainSpec::antisparse(1);
  Rng rng(43);
  const Matrix S = sample_uniform(spec, 2000, rng);
  const Matrix X = S;  // A = 1
  WsmInit init;
  const TrainResult r = train_online(X, spec, WsmHyper{}, initial_state(init, 1, 1, rng));
  const Vector a = S.row(0).tail(1000).transpose().cwiseAbs();
  const Vector b = r.Y.row(0).tail(1000).transpose().cwiseAbs();
  const Vector ac = a.array() - a.mean(), bc = b.array() - b.mean();
  CHECK(ac.dot(bc) / (ac.norm() * bc.norm()) >= 0.99);
}

TEST_CASE("empty input leaves the state untouched") {
  const WsmPreset p = find_preset("sparse");
  Rng rng(44);
  const WsmState s = initial_state(p.init, 5, 10, rng);
  const TrainResult r = train_online(Matrix(10, 0), p.domain, p.hyper, s);
  CHECK(r.Y.cols() == 0);
  CHECK(r.state.t == 0);
  CHECK(r.state.W_HX == s.W_HX);
  CHECK(r.state.D1 == s.D1);
}

TEST_CASE("lateral matrices stay symmetric during training") {
  const WsmPreset p = find_preset("nonneg-antisparse-copula");
  Rng rng(45);
  const Matrix S = sample_uniform(p.domain, 1000, rng);
  const MixtureDataset d = mix_and_corrupt(S, random_mixing_matrix(10, 5, rng), 30.0, rng);
  double worst = 0.0;
  TrainOptions o;
  o.snapshot_period = 50;
  o.on_snapshot = [&](std::uint64_t, const WsmState& s, const Matrix&) {
    worst = std::max({worst, (s.M_H - s.M_H.transpose()).cwiseAbs().maxCoeff(),
                      (s.M_Y - s.M_Y.transpose()).cwiseAbs().maxCoeff()});
  };
  train_online(d.X, p.domain, p.hyper, initial_state(p.init, 5, 10, rng), o);
  CHECK(worst <= 1e-10);
}

TEST_CASE("a gain at its floor stays there when pushed down") {
  WsmHyper h;
  h.lambda_sm = 1.0;
  h.mu_d1 = 1.0;
  h.d1_min = 0.5;
  WsmState s;
  s.D1 = Vector::Constant(1, 0.5);
  s.D2 = Vector::Ones(1);
  s.M_H = Matrix::Constant(1, 1, 3.0);  // recurrent energy far above feedforward
  s.M_Y = Matrix::Ones(1, 1);
  s.W_YH = Matrix::Ones(1, 1);
  s.W_HX = Matrix::Constant(1, 2, 0.1);
  update_gains(s, h);
  CHECK(s.D1[0] == 0.5);
}
