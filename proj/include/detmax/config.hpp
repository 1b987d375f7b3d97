#ifndef DETMAX_CONFIG_HPP
#define DETMAX_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detmax/batch.hpp"
#include "detmax/domains.hpp"
#include "detmax/presets.hpp"
#include "detmax/synth.hpp"
#include "detmax/wsm.hpp"

namespace detmax {

/// Bad config text or values. `field` is "section.key" when known, `line`
/// is 1-based (0 when the value did not come from a file line).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, int line = 0);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

/// Untyped view: section -> key -> raw value, plus where each key was read.
struct RawConfig {
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, int> lines;  // "section.key" -> line

  void set(const std::string& dotted_key, const std::string& value);
  std::optional<std::string> get(const std::string& dotted_key) const;
};

RawConfig parse_ini(const std::string& text);
/// JSON front-end: an object of sections, each an object of scalars or arrays
/// of scalars (arrays become space-separated lists).
RawConfig parse_json_config(const std::string& text);
/// Applies "section.key=value".
void apply_override(RawConfig& raw, const std::string& assignment);

enum class AlgorithmKind { Wsm, Pmf, LdInfomax };

struct ExperimentConfig {
  std::string id = "experiment";

  // domain
  std::string domain_kind = "sparse";
  Index n = 5;
  std::vector<Index> nonneg;               // 0-based, general only
  std::vector<std::vector<Index>> groups;  // 0-based, general only

  // generator
  GeneratorKind generator = GeneratorKind::Uniform;
  double rho = 0.0;
  ToeplitzKind toeplitz = ToeplitzKind::ConstantRow;
  CopulaRange range = CopulaRange::ZeroOne;
  double dof = 4.0;

  // mixing
  Index m = 10;
  std::optional<double> snr_db = 30.0;

  // algorithm
  AlgorithmKind algorithm = AlgorithmKind::Wsm;
  std::string preset = "sparse";
  WsmHyper hyper;
  WsmInit init;
  BatchOptions batch;

  // run
  Index t = 10000;
  std::vector<std::uint64_t> seeds{1};
  Index snapshot_period = 1000;
  Index eval_window = 2000;  // trailing online outputs scored by SINR
  bool skip_divergent = false;

  // sweep: one config key stepped over a list of values
  std::string sweep_key;
  std::vector<std::string> sweep_values;

  // output
  std::string out_dir = "out";
  bool svg = false;

  SourceDomainSpec domain() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Builds a typed config. Defaults come from the named preset (section
/// [algorithm] key preset); every explicit key then overrides them.
ExperimentConfig build_config(const RawConfig& raw);
/// Writes every field explicitly, so build_config(parse_ini(to_ini(c))) == c.
std::string to_ini(const ExperimentConfig& c);
/// Config text for a preset with its data setup filled in.
ExperimentConfig config_from_preset(const std::string& preset);

std::string algorithm_name(AlgorithmKind k);
std::string generator_name(GeneratorKind k);

}  // namespace detmax

#endif  // DETMAX_CONFIG_HPP
