#ifndef DETMAX_EXPERIMENT_HPP
#define DETMAX_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "detmax/config.hpp"
#include "detmax/io.hpp"
#include "detmax/metrics.hpp"
#include "detmax/synth.hpp"
#include "detmax/wsm.hpp"

namespace detmax {

/// Independent streams derived from one seed, so data and algorithm draws
/// never interfere.
Rng data_rng(std::uint64_t seed);
Rng algorithm_rng(std::uint64_t seed);

MixtureDataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

struct TrajectoryRow {
  std::uint64_t sample = 0;
  double overall_sinr_db = 0.0;
  Vector per_source_snr_db;
};

struct RunOutput {
  Matrix Y;                      // outputs for the processed columns
  EvalReport report;             // on the scored window
  Index window_begin = 0;        // scored columns [window_begin, t)
  std::optional<double> symbol_error_rate;  // 4-PAM only
  std::vector<TrajectoryRow> trajectory;    // online runs
  std::vector<double> objective_trace;      // batch runs
  std::optional<WsmState> state;            // online runs
  std::optional<Matrix> factor;             // PMF H or LD-InfoMax W
  TrainDiagnostics diagnostics;
};

/// Trains (or fits) the configured algorithm on the dataset and scores it.
/// With `resume`, online training continues at column resume->t.
RunOutput run_algorithm(const ExperimentConfig& cfg, const MixtureDataset& data,
                        std::uint64_t seed, const WsmState* resume = nullptr);

/// Nearest-symbol error rate of alpha-rescaled outputs against 4-PAM sources
/// over columns [begin, t).
double pam4_symbol_error_rate(const Matrix& S, const Matrix& Y, const Assignment& match,
                              Index begin);

/// Checkpoint arrays: W_HX, W_YH, M_H, M_Y, D1, D2 and t (1x1).
MatrixContainer state_to_container(const WsmState& s);
WsmState state_from_container(const MatrixContainer& c);

struct RunRecord {
  std::string sweep_value;  // empty when there is no sweep
  std::uint64_t seed = 0;
  std::string status;       // ok | diverged | error
  std::string message;
  double overall_sinr_db = 0.0;
  Vector per_source_snr_db;
  std::optional<double> symbol_error_rate;
  long nonconverged = 0;
  std::vector<TrajectoryRow> trajectory;
};

struct AggregateRow {
  std::string sweep_value;
  int runs = 0, failed = 0;
  double mean = 0.0, median = 0.0, p25 = 0.0, p75 = 0.0;
  std::optional<double> mean_ser;
};

struct ExperimentResult {
  ExperimentConfig base;
  std::vector<RunRecord> runs;  // sweep-major, then seed order
  std::vector<AggregateRow> aggregate;
  bool any_failed() const;
};

struct ExperimentOptions {
  unsigned threads = 0;  // 0: one per hardware thread
  std::function<void(const RunRecord&)> on_run;  // called from worker threads
};

/// Expands the sweep over `raw`, then runs every (value, seed) pair. Runs are
/// independent and execute concurrently; results come back in grid order.
ExperimentResult run_experiment(const RawConfig& raw, const ExperimentOptions& options = {});

/// Linear-interpolation percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

std::string runs_csv(const ExperimentResult& r);
std::string aggregate_csv(const ExperimentResult& r);
std::string trajectory_csv(const std::vector<TrajectoryRow>& rows, Index n);
std::string objective_csv(const std::vector<double>& trace);
/// First line of every experiment CSV; the only line that varies between
/// identical runs.
std::string timestamp_header(const std::string& what);

struct SvgSeries {
  std::string name;
  std::vector<double> x, y, lo, hi;  // lo/hi optional envelope
};
std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<SvgSeries>& series);
/// Mean SINR against the sweep value (or the mean trajectory without a sweep)
/// with a 25/75-percentile band.
std::string experiment_svg(const ExperimentResult& r);

/// Writes runs.csv, aggregate.csv, per-run trajectories and the optional SVG
/// under dir. Returns the files written.
std::vector<std::filesystem::path> write_experiment(const ExperimentResult& r,
                                                    const std::filesystem::path& dir,
                                                    bool svg);

}  // namespace detmax

#endif  // DETMAX_EXPERIMENT_HPP
