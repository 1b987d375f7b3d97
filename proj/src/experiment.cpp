#include "detmax/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "detmax/batch.hpp"
#include "detmax/presets.hpp"

namespace detmax {

namespace {

Rng seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return Rng(seq);
}

std::string csv_num(double v) { return format_double(v); }

EvalReport score(const Matrix& S, const Matrix& Y, Index begin, Index end) {
  return sinr_db(S.middleCols(begin, end - begin), Y.middleCols(begin, end - begin));
}

}  // namespace

Rng data_rng(std::uint64_t seed) { return seeded(seed, 0x64617461u); }
Rng algorithm_rng(std::uint64_t seed) { return seeded(seed, 0x616c676fu); }

MixtureDataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng rng = data_rng(seed);
  Matrix S;
  switch (cfg.generator) {
    case GeneratorKind::Uniform:
      S = sample_uniform(cfg.domain(), cfg.t, rng);
      break;
    case GeneratorKind::Copula: {
      CopulaConfig cc;
      cc.n = cfg.n;
      cc.t = cfg.t;
      cc.rho = cfg.rho;
      cc.toeplitz_kind = cfg.toeplitz;
      cc.range = cfg.range;
      cc.dof = cfg.dof;
      S = sample_copula_t(cc, rng);
      break;
    }
    case GeneratorKind::Pam4:
      S = sample_4pam(cfg.n, cfg.t, rng);
      break;
  }
  const Matrix A = random_mixing_matrix(cfg.m, cfg.n, rng);
  MixtureDataset d = mix_and_corrupt(S, A, cfg.snr_db, rng);
  d.seed = seed;
  return d;
}

double pam4_symbol_error_rate(const Matrix& S, const Matrix& Y, const Assignment& match,
                              Index begin) {
  static constexpr double kSymbols[4] = {-3.0, -1.0, 1.0, 3.0};
  long errors = 0, total = 0;
  for (Index i = 0; i < S.rows(); ++i) {
    const Index j = match.permutation[static_cast<std::size_t>(i)];
    for (Index k = begin; k < S.cols(); ++k) {
      const double v = match.scales[i] * Y(j, k);
      double best = kSymbols[0];
      for (double s : kSymbols)
        if (std::abs(v - s) < std::abs(v - best)) best = s;
      errors += best != S(i, k);
      ++total;
    }
  }
  return total ? static_cast<double>(errors) / static_cast<double>(total) : 0.0;
}

RunOutput run_algorithm(const ExperimentConfig& cfg, const MixtureDataset& data,
                        std::uint64_t seed, const WsmState* resume) {
  const SourceDomainSpec spec = cfg.domain();
  require(data.X.rows() == cfg.m && data.S.rows() == cfg.n, "dataset shape does not match config");
  require(data.X.cols() == data.S.cols(), "S and X disagree on the sample count");
  const Index t = data.X.cols();
  Rng rng = algorithm_rng(seed);
  RunOutput out;

  if (cfg.algorithm == AlgorithmKind::Wsm) {
    const WsmState init = resume ? *resume : initial_state(cfg.init, cfg.n, cfg.m, rng);
    const Index start = static_cast<Index>(init.t);
    require(start < t, "checkpoint already covers every sample");
    const Matrix S = data.S.middleCols(start, t - start);
    TrainOptions opts;
    opts.snapshot_period = cfg.snapshot_period;
    opts.skip_divergent = cfg.skip_divergent;
    opts.on_snapshot = [&](std::uint64_t processed, const WsmState&, const Matrix& Y) {
      const Index end = static_cast<Index>(processed);
      const Index begin = std::max<Index>(0, end - cfg.eval_window);
      if (end - begin < 2) return;
      const EvalReport r = score(S, Y, begin, end);
      out.trajectory.push_back({static_cast<std::uint64_t>(start + end), r.overall_sinr_db,
                                r.per_source_snr_db});
    };
    TrainResult res = train_online(data.X.middleCols(start, t - start), spec, cfg.hyper, init, opts);
    out.Y = std::move(res.Y);
    out.state = std::move(res.state);
    out.diagnostics = std::move(res.diagnostics);
    const Index cols = out.Y.cols();
    out.window_begin = std::max<Index>(0, cols - cfg.eval_window);
    require(cols - out.window_begin >= 2, "need at least two scored samples");
    out.report = score(S, out.Y, out.window_begin, cols);
    if (cfg.generator == GeneratorKind::Pam4) {
      const Matrix Sw = S.middleCols(out.window_begin, cols - out.window_begin);
      const Matrix Yw = out.Y.middleCols(out.window_begin, cols - out.window_begin);
      out.symbol_error_rate = pam4_symbol_error_rate(Sw, Yw, best_match(Sw, Yw), 0);
    }
    out.window_begin += start;
    return out;
  }

  require(resume == nullptr, "only online training can resume from a checkpoint");
  BatchResult fit = cfg.algorithm == AlgorithmKind::Pmf ? pmf_fit(data.X, spec, cfg.batch, rng)
                                                        : ldinfomax_fit(data.X, spec, cfg.batch, rng);
  out.Y = std::move(fit.Y);
  out.objective_trace = std::move(fit.objective_trace);
  out.factor = fit.H ? fit.H : fit.W;
  out.report = sinr_db(data.S, out.Y);
  if (cfg.generator == GeneratorKind::Pam4)
    out.symbol_error_rate = pam4_symbol_error_rate(data.S, out.Y, best_match(data.S, out.Y), 0);
  return out;
}

MatrixContainer state_to_container(const WsmState& s) {
  MatrixContainer c;
  c.put("W_HX", s.W_HX);
  c.put("W_YH", s.W_YH);
  c.put("M_H", s.M_H);
  c.put("M_Y", s.M_Y);
  c.put("D1", s.D1);
  c.put("D2", s.D2);
  c.put("t", Matrix::Constant(1, 1, static_cast<double>(s.t)));
  return c;
}

WsmState state_from_container(const MatrixContainer& c) {
  WsmState s;
  s.W_HX = c.get("W_HX");
  s.W_YH = c.get("W_YH");
  s.M_H = c.get("M_H");
  s.M_Y = c.get("M_Y");
  const Matrix d1 = c.get("D1"), d2 = c.get("D2"), t = c.get("t");
  require(d1.cols() == 1 && d2.cols() == 1 && t.size() == 1, "malformed checkpoint");
  s.D1 = d1.col(0);
  s.D2 = d2.col(0);
  require(t(0, 0) >= 0.0, "checkpoint sample count is negative");
  s.t = static_cast<std::uint64_t>(t(0, 0));
  s.validate_shapes();
  return s;
}

bool ExperimentResult::any_failed() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.status != "ok"; });
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ExperimentResult run_experiment(const RawConfig& raw, const ExperimentOptions& options) {
  ExperimentResult result;
  result.base = build_config(raw);

  struct Job {
    std::string value;
    ExperimentConfig cfg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<std::string> values = result.base.sweep_values;
  if (result.base.sweep_key.empty()) values = {""};
  for (const std::string& v : values) {
    ExperimentConfig cfg = result.base;
    if (!result.base.sweep_key.empty()) {
      RawConfig point = raw;
      point.set(result.base.sweep_key, v);
      cfg = build_config(point);
    }
    for (std::uint64_t seed : cfg.seeds) jobs.push_back({v, cfg, seed});
  }

  result.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      RunRecord rec;
      rec.sweep_value = job.value;
      rec.seed = job.seed;
      try {
        const MixtureDataset data = generate_dataset(job.cfg, job.seed);
        RunOutput out = run_algorithm(job.cfg, data, job.seed);
        rec.status = "ok";
        rec.overall_sinr_db = out.report.overall_sinr_db;
        rec.per_source_snr_db = out.report.per_source_snr_db;
        rec.symbol_error_rate = out.symbol_error_rate;
        rec.nonconverged = out.diagnostics.nonconverged;
        rec.trajectory = std::move(out.trajectory);
      } catch (const DivergenceError& e) {
        rec.status = "diverged";
        rec.message = e.what();
      } catch (const std::exception& e) {
        rec.status = "error";
        rec.message = e.what();
      }
      if (options.on_run) options.on_run(rec);
      result.runs[k] = std::move(rec);
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const std::string& v : values) {
    AggregateRow row;
    row.sweep_value = v;
    std::vector<double> sinr, ser;
    for (const RunRecord& r : result.runs) {
      if (r.sweep_value != v) continue;
      ++row.runs;
      if (r.status != "ok") {
        ++row.failed;
        continue;
      }
      sinr.push_back(r.overall_sinr_db);
      if (r.symbol_error_rate) ser.push_back(*r.symbol_error_rate);
    }
    if (!sinr.empty()) {
      double sum = 0.0;
      for (double s : sinr) sum += s;
      row.mean = sum / static_cast<double>(sinr.size());
      row.median = percentile(sinr, 50.0);
      row.p25 = percentile(sinr, 25.0);
      row.p75 = percentile(sinr, 75.0);
    }
    if (!ser.empty()) {
      double sum = 0.0;
      for (double s : ser) sum += s;
      row.mean_ser = sum / static_cast<double>(ser.size());
    }
    result.aggregate.push_back(row);
  }
  return result;
}

std::string timestamp_header(const std::string& what) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream o;
  o << "# " << what << " generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
  return o.str();
}

std::string runs_csv(const ExperimentResult& r) {
  const ExperimentConfig& c = r.base;
  std::ostringstream o;
  o << timestamp_header("detmax runs " + c.id);
  o << "experiment,algorithm,sweep_key,sweep_value,seed,status,overall_sinr_db";
  for (Index i = 0; i < c.n; ++i) o << ",snr_" << i + 1 << "_db";
  o << ",symbol_error_rate,nonconverged,message\n";
  for (const RunRecord& run : r.runs) {
    o << c.id << ',' << algorithm_name(c.algorithm) << ',' << c.sweep_key << ','
      << run.sweep_value << ',' << run.seed << ',' << run.status << ',';
    if (run.status == "ok") o << csv_num(run.overall_sinr_db);
    for (Index i = 0; i < c.n; ++i) {
      o << ',';
      if (run.status == "ok" && i < run.per_source_snr_db.size())
        o << csv_num(run.per_source_snr_db[i]);
    }
    o << ',';
    if (run.symbol_error_rate) o << csv_num(*run.symbol_error_rate);
    o << ',' << run.nonconverged << ',';
    std::string msg = run.message;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    if (!msg.empty()) o << '"' << msg << '"';
    o << '\n';
  }
  return o.str();
}

std::string aggregate_csv(const ExperimentResult& r) {
  const ExperimentConfig& c = r.base;
  std::ostringstream o;
  o << timestamp_header("detmax aggregate " + c.id);
  o << "experiment,algorithm,sweep_key,sweep_value,runs,failed,mean_sinr_db,median_sinr_db,"
       "p25_sinr_db,p75_sinr_db,mean_symbol_error_rate\n";
  for (const AggregateRow& a : r.aggregate) {
    o << c.id << ',' << algorithm_name(c.algorithm) << ',' << c.sweep_key << ',' << a.sweep_value
      << ',' << a.runs << ',' << a.failed << ',';
    if (a.runs > a.failed)
      o << csv_num(a.mean) << ',' << csv_num(a.median) << ',' << csv_num(a.p25) << ','
        << csv_num(a.p75);
    else
      o << ",,,";
    o << ',';
    if (a.mean_ser) o << csv_num(*a.mean_ser);
    o << '\n';
  }
  return o.str();
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows, Index n) {
  std::ostringstream o;
  o << "sample,overall_sinr_db";
  for (Index i = 0; i < n; ++i) o << ",snr_" << i + 1 << "_db";
  o << '\n';
  for (const TrajectoryRow& r : rows) {
    o << r.sample << ',' << csv_num(r.overall_sinr_db);
    for (Index i = 0; i < n; ++i) o << ',' << (i < r.per_source_snr_db.size() ? csv_num(r.per_source_snr_db[i]) : "");
    o << '\n';
  }
  return o.str();
}

std::string objective_csv(const std::vector<double>& trace) {
  std::ostringstream o;
  o << "iteration,objective\n";
  for (std::size_t k = 0; k < trace.size(); ++k) o << k + 1 << ',' << csv_num(trace[k]) << '\n';
  return o.str();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<SvgSeries>& series) {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const SvgSeries& s : series) {
    for (double x : s.x) x0 = std::min(x0, x), x1 = std::max(x1, x);
    for (double y : s.y) y0 = std::min(y0, y), y1 = std::max(y1, y);
    for (double y : s.lo) y0 = std::min(y0, y);
    for (double y : s.hi) y1 = std::max(y1, y);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 1.0, y1 += 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 16
      << "\" text-anchor=\"middle\">" << fixed(xv, std::abs(x1 - x0) < 10 ? 2 : 0) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1) << "\" text-anchor=\"end\">"
      << fixed(yv, 1) << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << fixed(py(yv), 1) << "\" x2=\"" << W - R
      << "\" y2=\"" << fixed(py(yv), 1) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << xml_escape(xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const SvgSeries& s = series[k];
    const char* color = kColors[k % 5];
    if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size() && !s.x.empty()) {
      o << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << fixed(px(s.x[i]), 1) << ',' << fixed(py(s.hi[i]), 1) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;)
        o << fixed(px(s.x[i]), 1) << ',' << fixed(py(s.lo[i]), 1) << ' ';
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      o << fixed(px(s.x[i]), 1) << ',' << fixed(py(s.y[i]), 1) << ' ';
    o << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\""
      << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string experiment_svg(const ExperimentResult& r) {
  const ExperimentConfig& c = r.base;
  SvgSeries s;
  s.name = algorithm_name(c.algorithm);
  if (!c.sweep_key.empty()) {
    for (const AggregateRow& a : r.aggregate) {
      if (a.runs == a.failed) continue;
      char* end = nullptr;
      const double x = std::strtod(a.sweep_value.c_str(), &end);
      if (end == a.sweep_value.c_str()) continue;
      s.x.push_back(x);
      s.y.push_back(a.mean);
      s.lo.push_back(a.p25);
      s.hi.push_back(a.p75);
    }
    return svg_line_chart(c.id + ": SINR vs " + c.sweep_key, c.sweep_key, "SINR (dB)", {s});
  }
  std::map<std::uint64_t, std::vector<double>> by_sample;
  for (const RunRecord& run : r.runs)
    for (const TrajectoryRow& row : run.trajectory) by_sample[row.sample].push_back(row.overall_sinr_db);
  if (by_sample.empty()) {
    for (const RunRecord& run : r.runs) {
      if (run.status != "ok") continue;
      s.x.push_back(static_cast<double>(run.seed));
      s.y.push_back(run.overall_sinr_db);
    }
    return svg_line_chart(c.id + ": SINR per seed", "seed", "SINR (dB)", {s});
  }
  for (const auto& [sample, vals] : by_sample) {
    double sum = 0.0;
    for (double v : vals) sum += v;
    s.x.push_back(static_cast<double>(sample));
    s.y.push_back(sum / static_cast<double>(vals.size()));
    s.lo.push_back(percentile(vals, 25.0));
    s.hi.push_back(percentile(vals, 75.0));
  }
  return svg_line_chart(c.id + ": SINR convergence", "sample", "SINR (dB)", {s});
}

std::vector<std::filesystem::path> write_experiment(const ExperimentResult& r,
                                                    const std::filesystem::path& dir, bool svg) {
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::filesystem::path& p, const std::string& text) {
    write_text(p, text);
    files.push_back(p);
  };
  emit(dir / "runs.csv", runs_csv(r));
  emit(dir / "aggregate.csv", aggregate_csv(r));
  emit(dir / "config.ini", to_ini(r.base));
  for (const RunRecord& run : r.runs) {
    if (run.trajectory.empty()) continue;
    std::string stem = "seed-" + std::to_string(run.seed);
    if (!run.sweep_value.empty()) stem = r.base.sweep_key + "-" + run.sweep_value + "-" + stem;
    emit(dir / "trajectories" / (stem + ".csv"), trajectory_csv(run.trajectory, r.base.n));
  }
  if (svg) emit(dir / "sinr.svg", experiment_svg(r));
  return files;
}

}  // namespace detmax
