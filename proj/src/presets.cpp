#include "detmax/presets.hpp"

#include <random>

namespace detmax {

namespace {

WsmPreset box_preset(std::string name) {
  WsmPreset p;
  p.name = std::move(name);
  p.init = WsmInit{1.0, 1.0, 2.0, 1.0, WeightInit::Identity, 0.0};
  return p;
}

WsmPreset l1_preset(std::string name, double d1) {
  WsmPreset p;
  p.name = std::move(name);
  p.init = WsmInit{d1, 1.0, 0.02, 0.02, WeightInit::RandomRows, 0.0033};
  p.hyper.tau_max = 750;
  p.hyper.d1_min = 1e-6;
  p.hyper.d1_max = 1e6;
  p.hyper.d2_min = 1.0;
  p.hyper.d2_max = 1.001;
  p.hyper.forget_nu = 0.25;
  return p;
}

void constant_step(WsmHyper& h, double step) {
  h.lr_base = step;
  h.lr_decay = 0.0;
  h.lr_floor = step;
}

std::vector<WsmPreset> build_all() {
  std::vector<WsmPreset> all;

  {
    WsmPreset p = box_preset("nonneg-antisparse-copula");
    p.hyper.mu_d1 = 1.0;
    p.hyper.mu_d2 = 1e-2;
    p.hyper.lambda_sm = 1.0 - 1e-5;
    p.hyper.forget_nu = 0.1;
    p.forget_nu_high_rho = 0.05;
    p.domain = SourceDomainSpec::nonneg_antisparse(5);
    p.generator = GeneratorKind::Copula;
    all.push_back(p);
  }
  {
    WsmPreset p = box_preset("antisparse-copula");
    p.hyper.mu_d1 = 1.125;
    p.hyper.mu_d2 = 0.2;
    p.hyper.lambda_sm = 1.0 - 5e-5;
    p.hyper.forget_nu = 0.6;
    p.forget_nu_high_rho = 0.25;
    p.hyper.tau_max = 750;
    p.domain = SourceDomainSpec::antisparse(4);
    p.generator = GeneratorKind::Copula;
    p.n = 4;
    p.m = 8;
    p.copula_toeplitz = "power";
    p.copula_range = "pm1";
    all.push_back(p);
  }
  {
    WsmPreset p = l1_preset("sparse", 8.0);
    p.hyper.mu_d1 = 20.0;
    p.hyper.mu_d2 = 1e-2;
    p.hyper.lambda_sm = 1.0 - 1e-5;
    constant_step(p.hyper, 0.5);
    p.domain = SourceDomainSpec::sparse(5);
    all.push_back(p);
  }
  {
    WsmPreset p = l1_preset("nonneg-sparse", 4.0);
    p.hyper.mu_d1 = 15.0;
    p.hyper.mu_d2 = 1e-2;
    p.hyper.lambda_sm = 1.0 - 1e-4;
    p.hyper.lr_base = 0.5;
    p.hyper.lr_decay = 0.005;
    p.hyper.lr_floor = 0.2;
    p.domain = SourceDomainSpec::nonneg_sparse(5);
    all.push_back(p);
  }
  {
    WsmPreset p = l1_preset("mixed-d6", 4.0);
    p.hyper.mu_d1 = 5.725;
    p.hyper.mu_d2 = 1e-2;
    p.hyper.lambda_sm = 1.0 - 1e-4;
    constant_step(p.hyper, 0.5);
    p.domain = SourceDomainSpec::general(3, {2}, {{0, 1}, {1, 2}});
    p.n = 3;
    p.m = 6;
    all.push_back(p);
  }
  {
    WsmPreset p = box_preset("mixed-antisparse");
    p.hyper.mu_d1 = 1.125;
    p.hyper.mu_d2 = 0.1;
    p.hyper.lambda_sm = 1.0 - 5e-5;
    p.hyper.forget_nu = 0.4;
    p.hyper.tau_max = 750;
    p.hyper.d2_min = 0.5;
    p.domain = SourceDomainSpec::general(5, {3, 4}, {});
    all.push_back(p);
  }
  {
    WsmPreset p = l1_preset("mixed-sparse-nnanti", 8.0);
    p.hyper.mu_d1 = 6.0;
    p.hyper.mu_d2 = 0.1;
    p.hyper.lambda_sm = 1.0 - 1e-4;
    p.hyper.lr_base = 0.5;
    p.hyper.lr_decay = 0.005;
    p.hyper.lr_floor = 0.01;
    p.hyper.d2_max = 5.0;
    p.domain = SourceDomainSpec::general(5, {0}, {{1, 2, 3, 4}});
    all.push_back(p);
  }
  {
    WsmPreset p = box_preset("4pam");
    p.init = WsmInit{0.5, 0.5, 2.0, 1.0, WeightInit::RandomRows, 0.005};
    p.hyper.mu_d1 = 0.01;
    p.hyper.mu_d2 = 0.01;
    p.hyper.lambda_sm = 1.0 - 5e-3;
    p.hyper.forget_nu = 0.3;
    p.hyper.forget_floor = 0.05;
    p.hyper.lr_base = 0.5;
    p.hyper.lr_decay = 0.005;
    p.hyper.lr_floor = 0.01;
    p.hyper.tau_max = 750;
    p.hyper.d2_max = 25.0;
    p.domain = SourceDomainSpec::antisparse(5);
    p.generator = GeneratorKind::Pam4;
    p.t = 100000;
    p.snr_db.reset();
    all.push_back(p);
  }
  {
    // No published recipe; borrowed from the nonnegative sparse network.
    WsmPreset p = l1_preset("simplex", 4.0);
    p.hyper.mu_d1 = 15.0;
    p.hyper.mu_d2 = 1e-2;
    p.hyper.lambda_sm = 1.0 - 1e-4;
    p.hyper.lr_base = 0.5;
    p.hyper.lr_decay = 0.005;
    p.hyper.lr_floor = 0.2;
    p.domain = SourceDomainSpec::unit_simplex(5);
    all.push_back(p);
  }
  return all;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const WsmPreset& p : build_all()) names.push_back(p.name);
  return names;
}

WsmPreset find_preset(const std::string& name) {
  for (WsmPreset& p : build_all())
    if (p.name == name) return p;
  throw ContractViolation("unknown preset '" + name + "'");
}

WsmHyper hyper_for_rho(const WsmPreset& preset, double rho) {
  WsmHyper h = preset.hyper;
  if (preset.forget_nu_high_rho && rho > 0.4) h.forget_nu = *preset.forget_nu_high_rho;
  return h;
}

WsmState initial_state(const WsmInit& init, Index n, Index m, Rng& rng) {
  require(n >= 1 && m >= n, "network needs m >= n >= 1");
  require(init.d1 > 0.0 && init.d2 > 0.0, "initial gains must be positive");
  WsmState s;
  s.D1 = Vector::Constant(n, init.d1);
  s.D2 = Vector::Constant(n, init.d2);
  s.M_H = init.m_h * Matrix::Identity(n, n);
  s.M_Y = init.m_y * Matrix::Identity(n, n);
  if (init.weights == WeightInit::Identity) {
    s.W_HX = Matrix::Identity(n, m);
    s.W_YH = Matrix::Identity(n, n);
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Index rows, Index cols) {
      Matrix W(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) W(i, j) = normal(rng);
      for (Index i = 0; i < rows; ++i) W.row(i) *= init.row_norm / W.row(i).norm();
      return W;
    };
    s.W_HX = draw(n, m);
    s.W_YH = draw(n, n);
  }
  s.t = 0;
  return s;
}

}  // namespace detmax
