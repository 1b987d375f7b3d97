#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "detmax/config.hpp"
#include "detmax/experiment.hpp"
#include "detmax/io.hpp"
#include "detmax/metrics.hpp"
#include "detmax/presets.hpp"

namespace fs = std::filesystem;
using namespace detmax;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kPartial = 4 };

struct Common {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI (or .json) experiment config");
  cmd->add_option("--preset", c.preset, "start from a named preset instead of a file");
  cmd->add_option("--override", c.overrides, "section.key=value, repeatable");
  cmd->add_option("--seed", c.seed, "run this seed only");
  cmd->add_option("--out", c.out, "output directory (default $DETMAX_OUT_DIR, then [output] dir)");
}

RawConfig load_raw(const Common& c) {
  RawConfig raw;
  if (!c.config_path.empty()) {
    const std::string text = read_text(c.config_path);
    raw = fs::path(c.config_path).extension() == ".json" ? parse_json_config(text)
                                                         : parse_ini(text);
  }
  if (!c.preset.empty()) {
    if (raw.get("algorithm.preset"))
      throw ConfigError("--preset conflicts with [algorithm] preset in the config file",
                        "algorithm.preset");
    raw.set("algorithm.preset", c.preset);
    if (!raw.get("experiment.id")) raw.set("experiment.id", c.preset);
  }
  for (const std::string& o : c.overrides) apply_override(raw, o);
  if (c.seed) raw.set("run.seeds", std::to_string(*c.seed));
  return raw;
}

fs::path out_root(const Common& c, const ExperimentConfig& cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("DETMAX_OUT_DIR"); env && *env) return env;
  return cfg.out_dir;
}

fs::path seed_dir(const fs::path& root, const ExperimentConfig& cfg, std::uint64_t seed) {
  return root / cfg.id / ("seed-" + std::to_string(seed));
}

std::string metadata(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::ostringstream o;
  o << "# dataset metadata\nseed = " << seed << "\n" << to_ini(cfg);
  return o.str();
}

void print_report(std::ostream& os, const EvalReport& r) {
  os << "overall SINR " << format_double(r.overall_sinr_db) << " dB\n";
  for (Index i = 0; i < r.per_source_snr_db.size(); ++i) {
    os << "  source " << i + 1 << " -> output " << r.permutation[static_cast<std::size_t>(i)] + 1
       << "  alpha " << format_double(r.scales[i]) << "  SNR "
       << format_double(r.per_source_snr_db[i]) << " dB\n";
  }
}

Matrix load_array(const std::string& path, const std::string& name) {
  if (fs::path(path).extension() == ".csv") return read_matrix_csv(path);
  return read_container(path).get(name);
}

int cmd_presets(const std::string& show) {
  if (!show.empty()) {
    std::cout << to_ini(config_from_preset(show));
    return kOk;
  }
  for (const std::string& name : preset_names()) {
    const ExperimentConfig c = config_from_preset(name);
    std::cout << name << "  domain=" << c.domain_kind << " n=" << c.n << " m=" << c.m
              << " t=" << c.t << " generator=" << generator_name(c.generator) << "\n";
  }
  return kOk;
}

int cmd_generate(const Common& common) {
  const ExperimentConfig cfg = build_config(load_raw(common));
  const fs::path root = out_root(common, cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const MixtureDataset d = generate_dataset(cfg, seed);
    MatrixContainer c;
    c.put("S", d.S);
    c.put("A", d.A);
    c.put("X", d.X);
    const fs::path dir = seed_dir(root, cfg, seed);
    write_container(dir / "dataset.dmxc", c);
    write_text(dir / "dataset.meta.txt", metadata(cfg, seed));
    std::cout << (dir / "dataset.dmxc").string() << "\n";
  }
  return kOk;
}

int cmd_train(const Common& common, const std::string& dataset, const std::string& resume) {
  const ExperimentConfig cfg = build_config(load_raw(common));
  const fs::path root = out_root(common, cfg);
  if ((!dataset.empty() || !resume.empty()) && cfg.seeds.size() != 1)
    throw ConfigError("--dataset and --resume need exactly one seed", "run.seeds");
  for (std::uint64_t seed : cfg.seeds) {
    MixtureDataset d;
    if (dataset.empty()) {
      d = generate_dataset(cfg, seed);
    } else {
      const MatrixContainer c = read_container(dataset);
      d.S = c.get("S");
      d.X = c.get("X");
      if (c.has("A")) d.A = c.get("A");
    }
    std::optional<WsmState> start;
    if (!resume.empty()) start = state_from_container(read_container(resume));
    const RunOutput out = run_algorithm(cfg, d, seed, start ? &*start : nullptr);

    const fs::path dir = seed_dir(root, cfg, seed);
    MatrixContainer y;
    y.put("Y", out.Y);
    if (out.factor) y.put(cfg.algorithm == AlgorithmKind::Pmf ? "H" : "W", *out.factor);
    write_container(dir / "outputs.dmxc", y);
    if (out.state) {
      write_container(dir / "checkpoint.dmxc", state_to_container(*out.state));
      write_text(dir / "trajectory.csv", trajectory_csv(out.trajectory, cfg.n));
    } else {
      write_text(dir / "objective.csv", objective_csv(out.objective_trace));
    }
    std::cout << cfg.id << " seed " << seed << " (" << algorithm_name(cfg.algorithm) << ")\n";
    print_report(std::cout, out.report);
    if (out.symbol_error_rate)
      std::cout << "symbol error rate " << format_double(*out.symbol_error_rate) << "\n";
    if (out.diagnostics.nonconverged)
      std::cout << "neural dynamics hit tau_max on " << out.diagnostics.nonconverged
                << " samples\n";
  }
  return kOk;
}

int cmd_evaluate(const std::string& sources, const std::string& outputs,
                 const std::string& s_name, const std::string& y_name, const std::string& csv) {
  const Matrix S = load_array(sources, s_name);
  const Matrix Y = load_array(outputs, y_name);
  if (S.rows() != Y.rows() || S.cols() != Y.cols() || S.cols() < 2)
    throw ConfigError("S and Y must have the same shape with at least two columns");
  const EvalReport r = sinr_db(S, Y);
  print_report(std::cout, r);
  if (!csv.empty()) {
    std::ostringstream o;
    o << "source,output,alpha,snr_db\n";
    for (Index i = 0; i < S.rows(); ++i)
      o << i + 1 << ',' << r.permutation[static_cast<std::size_t>(i)] + 1 << ','
        << format_double(r.scales[i]) << ',' << format_double(r.per_source_snr_db[i]) << '\n';
    o << "all,,," << format_double(r.overall_sinr_db) << '\n';
    write_text(csv, o.str());
  }
  return kOk;
}

int cmd_experiment(const Common& common, bool svg, unsigned threads) {
  const RawConfig raw = load_raw(common);
  const ExperimentConfig base = build_config(raw);
  ExperimentOptions opts;
  opts.threads = threads;
  std::mutex io;
  opts.on_run = [&](const RunRecord& r) {
    std::lock_guard<std::mutex> lock(io);
    std::cerr << base.id << (r.sweep_value.empty() ? "" : " " + base.sweep_key + "=" + r.sweep_value)
              << " seed " << r.seed << ": "
              << (r.status == "ok" ? format_double(r.overall_sinr_db) + " dB" : r.status + " " + r.message)
              << "\n";
  };
  const ExperimentResult result = run_experiment(raw, opts);
  const fs::path dir = out_root(common, base) / base.id;
  for (const fs::path& p : write_experiment(result, dir, svg || base.svg))
    if (p.parent_path() == dir) std::cout << p.string() << "\n";
  for (const AggregateRow& a : result.aggregate) {
    std::cout << (a.sweep_value.empty() ? base.id : base.sweep_key + "=" + a.sweep_value)
              << ": median " << format_double(a.median) << " dB over " << a.runs - a.failed
              << "/" << a.runs << " runs\n";
  }
  if (result.any_failed()) {
    std::cerr << "some runs failed; aggregates cover successful runs only\n";
    return kPartial;
  }
  return kOk;
}

int cmd_inspect(const std::string& path) {
  const MatrixContainer c = read_container(path);
  for (const auto& e : c.entries) {
    std::cout << e.name << "  " << e.value.rows() << "x" << e.value.cols();
    if (e.value.size() > 0)
      std::cout << "  min " << format_double(e.value.minCoeff()) << "  max "
                << format_double(e.value.maxCoeff()) << "  mean " << format_double(e.value.mean());
    std::cout << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Det-Max blind source separation toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string show, dataset, resume, sources, outputs, s_name = "S", y_name = "Y", csv, file;
  bool svg = false;
  unsigned threads = 0;

  CLI::App* presets = app.add_subcommand("presets", "list presets, or print one as config");
  presets->add_option("--show", show, "preset to print");

  CLI::App* generate = app.add_subcommand("generate", "write S, A, X for every seed");
  add_common(generate, common);

  CLI::App* train = app.add_subcommand("train", "train or fit, write outputs and traces");
  add_common(train, common);
  train->add_option("--dataset", dataset, "container with S and X (default: generate)");
  train->add_option("--resume", resume, "checkpoint to continue from");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score outputs against sources");
  evaluate->add_option("--sources", sources, "container or CSV with S")->required();
  evaluate->add_option("--outputs", outputs, "container or CSV with Y")->required();
  evaluate->add_option("--sources-name", s_name, "array name inside the sources container");
  evaluate->add_option("--outputs-name", y_name, "array name inside the outputs container");
  evaluate->add_option("--csv", csv, "also write the report as CSV");

  CLI::App* experiment = app.add_subcommand("experiment", "seed x sweep grid with aggregation");
  add_common(experiment, common);
  experiment->add_flag("--svg", svg, "write an SVG chart");
  experiment->add_option("--threads", threads, "worker threads (default: all cores)");

  CLI::App* inspect = app.add_subcommand("inspect", "list the arrays in a container");
  inspect->add_option("file", file, "matrix container")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*presets) return cmd_presets(show);
    if (*generate) return cmd_generate(common);
    if (*train) return cmd_train(common, dataset, resume);
    if (*evaluate) return cmd_evaluate(sources, outputs, s_name, y_name, csv);
    if (*experiment) return cmd_experiment(common, svg, threads);
    if (*inspect) return cmd_inspect(file);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << ": " << e.what() << "\n";
    return kConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
