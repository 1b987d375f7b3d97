#include "detmax/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "detmax/io.hpp"

namespace detmax {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::pair<std::string, std::string> split_key(const std::string& dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
    throw ConfigError("expected section.key, got '" + dotted + "'", dotted);
  return {dotted.substr(0, dot), dotted.substr(dot + 1)};
}

// Every accepted key; anything else is reported as unknown.
const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s = {
      {"experiment", {"id"}},
      {"domain", {"kind", "n", "nonneg", "groups"}},
      {"generator", {"kind", "rho", "toeplitz", "range", "dof"}},
      {"mixing", {"m", "snr_db"}},
      {"algorithm", {"kind", "preset"}},
      {"wsm",
       {"beta", "lambda_sm", "forget_nu", "forget_floor", "mu_d1", "mu_d2", "d1_min", "d1_max",
        "d2_min", "d2_max", "tau_max", "eps", "lr_base", "lr_decay", "lr_floor", "hidden_clip",
        "warm_start"}},
      {"init", {"d1", "d2", "m_h", "m_y", "weights", "row_norm"}},
      {"batch", {"iters", "lr", "penalty", "eps_reg"}},
      {"run", {"t", "seeds", "snapshot_period", "eval_window", "skip_divergent"}},
      {"sweep", {"key", "values"}},
      {"output", {"dir", "svg"}},
  };
  return s;
}

void check_known(const std::string& section, const std::string& key, int line) {
  const auto it = schema().find(section);
  if (it == schema().end())
    throw ConfigError("unknown section [" + section + "]", section + "." + key, line);
  if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
    throw ConfigError("unknown key '" + key + "' in [" + section + "]", section + "." + key, line);
}

class Fields {
 public:
  explicit Fields(const RawConfig& raw) : raw_(raw) {}

  bool has(const std::string& key) const { return raw_.get(key).has_value(); }

  void str(const std::string& key, std::string& out) const {
    if (auto v = raw_.get(key)) out = *v;
  }

  void real(const std::string& key, double& out) const {
    if (auto v = raw_.get(key)) out = to_real(key, *v);
  }

  template <typename I>
  void integer(const std::string& key, I& out, long long lo = 0) const {
    if (auto v = raw_.get(key)) {
      const long long x = to_int(key, *v);
      if (x < lo) fail(key, "must be at least " + std::to_string(lo));
      out = static_cast<I>(x);
    }
  }

  void flag(const std::string& key, bool& out) const {
    if (auto v = raw_.get(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else fail(key, "expected true or false, got '" + *v + "'");
    }
  }

  double to_real(const std::string& key, const std::string& text) const {
    double x = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, x);
    if (res.ec != std::errc() || res.ptr != e || text.empty())
      fail(key, "expected a number, got '" + text + "'");
    return x;
  }

  long long to_int(const std::string& key, const std::string& text) const {
    long long x = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
      fail(key, "expected an integer, got '" + text + "'");
    return x;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = raw_.lines.find(key);
    throw ConfigError(key + ": " + what, key, it == raw_.lines.end() ? 0 : it->second);
  }

 private:
  const RawConfig& raw_;
};

std::vector<Index> parse_index_list(const Fields& f, const std::string& key,
                                    const std::string& text, Index n) {
  std::vector<Index> out;
  for (const std::string& tok : split_ws(text)) {
    const long long i = f.to_int(key, tok);
    if (i < 1 || i > n) f.fail(key, "index " + tok + " outside 1.." + std::to_string(n));
    out.push_back(static_cast<Index>(i - 1));
  }
  return out;
}

std::string index_list(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ' ';
    s += std::to_string(v[k] + 1);
  }
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ' ';
    s += v[k];
  }
  return s;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, std::string field, int line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      field_(std::move(field)),
      line_(line) {}

void RawConfig::set(const std::string& dotted_key, const std::string& value) {
  const auto [section, key] = split_key(dotted_key);
  check_known(section, key, 0);
  values[section][key] = value;
  lines.erase(dotted_key);
}

std::optional<std::string> RawConfig::get(const std::string& dotted_key) const {
  const auto [section, key] = split_key(dotted_key);
  const auto s = values.find(section);
  if (s == values.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

RawConfig parse_ini(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", {}, lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section))
        throw ConfigError("unknown section [" + section + "]", section, lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", {}, lineno);
    if (section.empty()) throw ConfigError("key outside of any section", {}, lineno);
    const std::string key = trim(line.substr(0, eq));
    check_known(section, key, lineno);
    const std::string dotted = section + "." + key;
    if (raw.get(dotted)) throw ConfigError("duplicate key '" + key + "'", dotted, lineno);
    raw.values[section][key] = trim(line.substr(eq + 1));
    raw.lines[dotted] = lineno;
  }
  return raw;
}

RawConfig parse_json_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be an object of sections");
  auto scalar = [](const nlohmann::json& v, const std::string& field) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_double(v.get<double>());
    if (v.is_null()) return "none";
    throw ConfigError("expected a scalar", field);
  };
  RawConfig raw;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) throw ConfigError("section must be an object", section);
    for (const auto& [key, value] : body.items()) {
      const std::string dotted = section + "." + key;
      check_known(section, key, 0);
      std::string text_value;
      if (value.is_array()) {
        std::vector<std::string> parts;
        for (const auto& item : value) {
          if (item.is_array()) {  // groups: [[1,2],[2,3]]
            std::vector<std::string> inner;
            for (const auto& x : item) inner.push_back(scalar(x, dotted));
            parts.push_back(join(inner) + ";");
          } else {
            parts.push_back(scalar(item, dotted));
          }
        }
        text_value = join(parts);
      } else {
        text_value = scalar(value, dotted);
      }
      raw.values[section][key] = text_value;
    }
  }
  return raw;
}

void apply_override(RawConfig& raw, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: '" + assignment + "'");
  raw.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string algorithm_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::Wsm: return "wsm";
    case AlgorithmKind::Pmf: return "pmf";
    case AlgorithmKind::LdInfomax: return "ldinfomax";
  }
  return "wsm";
}

std::string generator_name(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Uniform: return "uniform";
    case GeneratorKind::Copula: return "copula";
    case GeneratorKind::Pam4: return "4pam";
  }
  return "uniform";
}

SourceDomainSpec ExperimentConfig::domain() const {
  const auto kind = parse_domain_kind(domain_kind);
  require(kind.has_value(), "unknown domain kind '" + domain_kind + "'");
  switch (*kind) {
    case DomainKind::Antisparse: return SourceDomainSpec::antisparse(n);
    case DomainKind::NonnegAntisparse: return SourceDomainSpec::nonneg_antisparse(n);
    case DomainKind::Sparse: return SourceDomainSpec::sparse(n);
    case DomainKind::NonnegSparse: return SourceDomainSpec::nonneg_sparse(n);
    case DomainKind::UnitSimplex: return SourceDomainSpec::unit_simplex(n);
    case DomainKind::General: return SourceDomainSpec::general(n, nonneg, groups);
  }
  return SourceDomainSpec::antisparse(n);
}

ExperimentConfig config_from_preset(const std::string& name) {
  const WsmPreset p = find_preset(name);
  ExperimentConfig c;
  c.id = name;
  c.preset = name;
  c.domain_kind = std::string(to_string(p.domain.kind()));
  c.n = p.domain.n();
  if (p.domain.kind() == DomainKind::General) {
    c.nonneg = p.domain.nonneg_set();
    c.groups = p.domain.groups();
  }
  c.generator = p.generator;
  c.toeplitz = p.copula_toeplitz == "power" ? ToeplitzKind::PowerRow : ToeplitzKind::ConstantRow;
  c.range = p.copula_range == "pm1" ? CopulaRange::SymmetricOne : CopulaRange::ZeroOne;
  c.m = p.m;
  c.snr_db = p.snr_db;
  c.hyper = p.hyper;
  c.init = p.init;
  c.t = p.t;
  c.snapshot_period = std::max<Index>(1, p.t / 20);
  c.eval_window = p.generator == GeneratorKind::Pam4 ? 10000 : 2000;
  return c;
}

ExperimentConfig build_config(const RawConfig& raw) {
  const Fields f(raw);
  std::string preset = "sparse";
  f.str("algorithm.preset", preset);
  ExperimentConfig c;
  try {
    c = config_from_preset(preset);
  } catch (const ContractViolation& e) {
    f.fail("algorithm.preset", e.what());
  }

  f.str("experiment.id", c.id);
  if (c.id.empty() || c.id.find_first_of(" /\\") != std::string::npos)
    f.fail("experiment.id", "must be a nonempty name without spaces or slashes");

  if (f.has("domain.kind")) {
    f.str("domain.kind", c.domain_kind);
    if (!parse_domain_kind(c.domain_kind))
      f.fail("domain.kind", "unknown kind '" + c.domain_kind + "'");
    c.nonneg.clear();
    c.groups.clear();
  }
  f.integer("domain.n", c.n, 1);
  if (auto v = raw.get("domain.nonneg")) c.nonneg = parse_index_list(f, "domain.nonneg", *v, c.n);
  if (auto v = raw.get("domain.groups")) {
    c.groups.clear();
    std::string text = *v;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ';')) {
      if (trim(part).empty()) continue;
      c.groups.push_back(parse_index_list(f, "domain.groups", part, c.n));
    }
  }
  if (c.domain_kind != "general" && (!c.nonneg.empty() || !c.groups.empty()))
    f.fail("domain.nonneg", "index sets are only allowed for the general kind");
  try {
    (void)c.domain();
  } catch (const ContractViolation& e) {
    f.fail("domain.kind", e.what());
  }

  if (auto v = raw.get("generator.kind")) {
    if (*v == "uniform") c.generator = GeneratorKind::Uniform;
    else if (*v == "copula") c.generator = GeneratorKind::Copula;
    else if (*v == "4pam") c.generator = GeneratorKind::Pam4;
    else f.fail("generator.kind", "unknown kind '" + *v + "' (uniform, copula, 4pam)");
  }
  f.real("generator.rho", c.rho);
  if (!(c.rho >= 0.0 && c.rho < 1.0)) f.fail("generator.rho", "must lie in [0, 1)");
  if (auto v = raw.get("generator.toeplitz")) {
    if (*v == "constant") c.toeplitz = ToeplitzKind::ConstantRow;
    else if (*v == "power") c.toeplitz = ToeplitzKind::PowerRow;
    else f.fail("generator.toeplitz", "expected constant or power");
  }
  if (auto v = raw.get("generator.range")) {
    if (*v == "01") c.range = CopulaRange::ZeroOne;
    else if (*v == "pm1") c.range = CopulaRange::SymmetricOne;
    else f.fail("generator.range", "expected 01 or pm1");
  }
  f.real("generator.dof", c.dof);
  if (!(c.dof > 0.0)) f.fail("generator.dof", "must be positive");

  f.integer("mixing.m", c.m, 1);
  if (c.m < c.n) f.fail("mixing.m", "needs at least as many mixtures as sources");
  if (auto v = raw.get("mixing.snr_db")) {
    if (*v == "none" || *v == "inf") c.snr_db.reset();
    else c.snr_db = f.to_real("mixing.snr_db", *v);
  }

  if (auto v = raw.get("algorithm.kind")) {
    if (*v == "wsm") c.algorithm = AlgorithmKind::Wsm;
    else if (*v == "pmf") c.algorithm = AlgorithmKind::Pmf;
    else if (*v == "ldinfomax") c.algorithm = AlgorithmKind::LdInfomax;
    else f.fail("algorithm.kind", "unknown kind '" + *v + "' (wsm, pmf, ldinfomax)");
  }

  // The correlation level picks the forgetting constant unless set explicitly.
  if (!f.has("wsm.forget_nu")) c.hyper.forget_nu = hyper_for_rho(find_preset(preset), c.rho).forget_nu;
  WsmHyper& h = c.hyper;
  f.real("wsm.beta", h.beta);
  f.real("wsm.lambda_sm", h.lambda_sm);
  f.real("wsm.forget_nu", h.forget_nu);
  f.real("wsm.forget_floor", h.forget_floor);
  f.real("wsm.mu_d1", h.mu_d1);
  f.real("wsm.mu_d2", h.mu_d2);
  f.real("wsm.d1_min", h.d1_min);
  f.real("wsm.d1_max", h.d1_max);
  f.real("wsm.d2_min", h.d2_min);
  f.real("wsm.d2_max", h.d2_max);
  f.integer("wsm.tau_max", h.tau_max, 1);
  f.real("wsm.eps", h.eps);
  f.real("wsm.lr_base", h.lr_base);
  f.real("wsm.lr_decay", h.lr_decay);
  f.real("wsm.lr_floor", h.lr_floor);
  f.real("wsm.hidden_clip", h.hidden_clip);
  f.flag("wsm.warm_start", h.warm_start);
  try {
    h.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("[wsm] ") + e.what(), "wsm");
  }

  f.real("init.d1", c.init.d1);
  f.real("init.d2", c.init.d2);
  f.real("init.m_h", c.init.m_h);
  f.real("init.m_y", c.init.m_y);
  if (auto v = raw.get("init.weights")) {
    if (*v == "identity") c.init.weights = WeightInit::Identity;
    else if (*v == "random") c.init.weights = WeightInit::RandomRows;
    else f.fail("init.weights", "expected identity or random");
  }
  f.real("init.row_norm", c.init.row_norm);
  if (!(c.init.d1 > 0.0 && c.init.d2 > 0.0)) f.fail("init.d1", "initial gains must be positive");

  f.integer("batch.iters", c.batch.iters, 0);
  f.real("batch.lr", c.batch.lr);
  f.real("batch.penalty", c.batch.penalty);
  f.real("batch.eps_reg", c.batch.eps_reg);
  if (!(c.batch.lr > 0.0)) f.fail("batch.lr", "must be positive");
  if (!(c.batch.penalty > 0.0)) f.fail("batch.penalty", "must be positive");
  if (!(c.batch.eps_reg > 0.0)) f.fail("batch.eps_reg", "must be positive");

  f.integer("run.t", c.t, 1);
  if (auto v = raw.get("run.seeds")) {
    c.seeds.clear();
    for (const std::string& tok : split_ws(*v)) {
      const long long s = f.to_int("run.seeds", tok);
      if (s < 0) f.fail("run.seeds", "seeds must be nonnegative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (c.seeds.empty()) f.fail("run.seeds", "needs at least one seed");
  }
  f.integer("run.snapshot_period", c.snapshot_period, 1);
  f.integer("run.eval_window", c.eval_window, 1);
  f.flag("run.skip_divergent", c.skip_divergent);

  f.str("sweep.key", c.sweep_key);
  if (auto v = raw.get("sweep.values")) c.sweep_values = split_ws(*v);
  if (!c.sweep_key.empty()) {
    if (c.sweep_key.rfind("sweep.", 0) == 0) f.fail("sweep.key", "cannot sweep the sweep itself");
    const auto [section, key] = split_key(c.sweep_key);
    check_known(section, key, 0);
    if (c.sweep_values.empty()) f.fail("sweep.values", "needs at least one value");
  } else if (!c.sweep_values.empty()) {
    f.fail("sweep.key", "values given without a key");
  }

  f.str("output.dir", c.out_dir);
  f.flag("output.svg", c.svg);
  return c;
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream o;
  auto num = [](double v) { return format_double(v); };
  o << "[experiment]\nid = " << c.id << "\n\n";
  o << "[domain]\nkind = " << c.domain_kind << "\nn = " << c.n << "\n";
  if (c.domain_kind == "general") {
    o << "nonneg = " << index_list(c.nonneg) << "\n";
    o << "groups = ";
    for (std::size_t k = 0; k < c.groups.size(); ++k) {
      if (k) o << "; ";
      o << index_list(c.groups[k]);
    }
    o << "\n";
  }
  o << "\n[generator]\nkind = " << generator_name(c.generator) << "\nrho = " << num(c.rho)
    << "\ntoeplitz = " << (c.toeplitz == ToeplitzKind::PowerRow ? "power" : "constant")
    << "\nrange = " << (c.range == CopulaRange::SymmetricOne ? "pm1" : "01")
    << "\ndof = " << num(c.dof) << "\n\n";
  o << "[mixing]\nm = " << c.m << "\nsnr_db = " << (c.snr_db ? num(*c.snr_db) : "none")
    << "\n\n";
  o << "[algorithm]\nkind = " << algorithm_name(c.algorithm) << "\npreset = " << c.preset
    << "\n\n";
  const WsmHyper& h = c.hyper;
  o << "[wsm]\nbeta = " << num(h.beta) << "\nlambda_sm = " << num(h.lambda_sm)
    << "\nforget_nu = " << num(h.forget_nu) << "\nforget_floor = " << num(h.forget_floor)
    << "\nmu_d1 = " << num(h.mu_d1) << "\nmu_d2 = " << num(h.mu_d2)
    << "\nd1_min = " << num(h.d1_min) << "\nd1_max = " << num(h.d1_max)
    << "\nd2_min = " << num(h.d2_min) << "\nd2_max = " << num(h.d2_max)
    << "\ntau_max = " << h.tau_max << "\neps = " << num(h.eps)
    << "\nlr_base = " << num(h.lr_base) << "\nlr_decay = " << num(h.lr_decay)
    << "\nlr_floor = " << num(h.lr_floor) << "\nhidden_clip = " << num(h.hidden_clip)
    << "\nwarm_start = " << (h.warm_start ? "true" : "false") << "\n\n";
  o << "[init]\nd1 = " << num(c.init.d1) << "\nd2 = " << num(c.init.d2)
    << "\nm_h = " << num(c.init.m_h) << "\nm_y = " << num(c.init.m_y)
    << "\nweights = " << (c.init.weights == WeightInit::Identity ? "identity" : "random")
    << "\nrow_norm = " << num(c.init.row_norm) << "\n\n";
  o << "[batch]\niters = " << c.batch.iters << "\nlr = " << num(c.batch.lr)
    << "\npenalty = " << num(c.batch.penalty) << "\neps_reg = " << num(c.batch.eps_reg)
    << "\n\n";
  o << "[run]\nt = " << c.t << "\nseeds =";
  for (auto s : c.seeds) o << ' ' << s;
  o << "\nsnapshot_period = " << c.snapshot_period << "\neval_window = " << c.eval_window
    << "\nskip_divergent = " << (c.skip_divergent ? "true" : "false") << "\n\n";
  o << "[sweep]\nkey = " << c.sweep_key << "\nvalues = " << join(c.sweep_values) << "\n\n";
  o << "[output]\ndir = " << c.out_dir << "\nsvg = " << (c.svg ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace detmax
