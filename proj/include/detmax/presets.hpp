#ifndef DETMAX_PRESETS_HPP
#define DETMAX_PRESETS_HPP

#include <optional>
#include <string>
#include <vector>

#include "detmax/domains.hpp"
#include "detmax/wsm.hpp"

namespace detmax {

enum class WeightInit { Identity, RandomRows };

/// How a fresh network is initialized.
struct WsmInit {
  double d1 = 1.0, d2 = 1.0;      // D = d I
  double m_h = 2.0, m_y = 1.0;    // M = m I
  WeightInit weights = WeightInit::Identity;
  double row_norm = 0.0033;       // for RandomRows: every row rescaled to this norm
  bool operator==(const WsmInit&) const = default;
};

enum class GeneratorKind { Uniform, Copula, Pam4 };

/// Network settings plus the data setup it was tuned for.
struct WsmPreset {
  std::string name;
  WsmHyper hyper;
  WsmInit init;
  // nu for rho > 0.4 when the preset depends on rho
  std::optional<double> forget_nu_high_rho;
  SourceDomainSpec domain = SourceDomainSpec::antisparse(1);
  GeneratorKind generator = GeneratorKind::Uniform;
  Index n = 5, m = 10, t = 10000;
  std::optional<double> snr_db = 30.0;
  std::string copula_toeplitz = "constant";  // or "power"
  std::string copula_range = "01";           // or "pm1"
};

std::vector<std::string> preset_names();
/// Throws ContractViolation for an unknown name.
WsmPreset find_preset(const std::string& name);

/// nu adjusted for the copula correlation level.
WsmHyper hyper_for_rho(const WsmPreset& preset, double rho);

/// Fresh state with the preset's initialization. The rng is used only for
/// RandomRows.
WsmState initial_state(const WsmInit& init, Index n, Index m, Rng& rng);

}  // namespace detmax

#endif  // DETMAX_PRESETS_HPP
