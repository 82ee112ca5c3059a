#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparselb/env.hpp"
#include "sparselb/theory.hpp"

namespace sparselb {

// Manifest problems: bad JSON, unknown keys, unresolvable grid cells.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Output path already holds results and --force was not given.
struct CollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One routing/communication/emulation combination from a manifest. Bundles
// with a communication pattern expand over the manifest's x grid; bundles
// without one are baselines and appear once per (load, replication).
struct PolicyBundle {
  PolicySpec policy;
  CommKind comm = CommKind::none;
  ApproxKind algo = ApproxKind::basic;
  std::string label;

  bool swept_over_x() const { return comm != CommKind::none; }
};

// Parsed experiment manifest. `loads` are Bernoulli arrival probabilities for
// the slot engine and utilization levels for the event engine (arrival rate =
// load * total work rate / mean requirement).
struct ExperimentSpec {
  std::string name = "experiment";
  EngineKind engine = EngineKind::slot;
  std::uint32_t servers = 30;
  double horizon = 1e6;
  std::uint64_t seed = 1;
  std::vector<double> loads{0.8};
  std::vector<std::uint32_t> x_values{3};
  std::vector<PolicyBundle> bundles;
  ServiceSpec service;              // geometric, mean 30
  std::vector<double> mu;           // event engine work rates
  GapLaw gap_law = GapLaw::exponential;
  std::uint32_t replications = 1;
  double warmup_fraction = 0.1;     // JCT entries before this arrival fraction drop
  double rt_rate = 0.0;             // 0 derives the timer rate as lambda/(K x)
  bool coupled = false;
  bool trace = false;
  bool ccdf = true;
  std::uint64_t workload_stride = 0;

  void validate() const;
};

// `origin` names the manifest in diagnostics (file path or "<inline>").
ExperimentSpec parse_experiment(const std::string& json_text, const std::string& origin);
ExperimentSpec load_experiment(const std::string& path);

// Scaling sweep manifests reuse the same JSON conventions.
ScalingConfig parse_scaling(const std::string& json_text, const std::string& origin);
ScalingConfig load_scaling(const std::string& path);

// One fully resolved grid cell. Cells at the same (load, replication) share
// the input seed, so every policy replays identical arrivals and
// requirements; the resolved EnvConfig is ready to run.
struct Cell {
  std::string label;
  PolicyBundle bundle;
  std::uint32_t x = 0;  // 0 for baselines
  double load = 0.0;
  std::uint32_t replication = 0;
  EnvConfig env;
};

std::vector<Cell> expand_cells(const ExperimentSpec& spec);

// One summary row; write_summary_csv emits the columns in this order.
struct RunRow {
  std::string cell;
  std::string engine;
  std::string policy;
  std::string comm;
  std::string algo;
  std::uint32_t x = 0;
  double rt_rate = 0.0;
  double load = 0.0;
  std::uint32_t replication = 0;
  std::uint64_t seed = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t messages = 0;
  double relative_comm = 0.0;  // NaN until something departs
  std::uint64_t sup_aq = 0;
  double jct_mean = 0.0;       // post-warmup; NaN when nothing completed
  double jct_median = 0.0;
  double jct_p99 = 0.0;
  double mean_queue = 0.0;     // time-average jobs in system
  std::uint64_t violations = 0;
  std::string stream_digest;   // hex; equal across policies at fixed (load, rep)
  std::string config_digest;   // hex over the resolved cell configuration
};

struct CellOutput {
  RunRow row;
  CcdfCurve jct_ccdf;  // post-warmup tail, empty when disabled
  std::vector<MetricsLog::TraceEvent> trace;
};

// Runs one cell and checks its run-level guarantees: zero invariant
// violations, and exact per-departure accounting for baselines.
CellOutput run_cell(const ExperimentSpec& spec, const Cell& cell);

// Runs every cell (optionally across threads), preserves cell order, and
// verifies that stream digests agree across policies at each (load, rep).
std::vector<CellOutput> run_cells(const ExperimentSpec& spec,
                                  const std::vector<Cell>& cells,
                                  std::uint32_t threads, std::ostream* progress);

// All floating point columns print with 9 significant digits.
std::string format_g9(double v);
std::string hex_u64(std::uint64_t v);

void write_summary_csv(std::ostream& os, const std::vector<RunRow>& rows);
void write_ccdf_csv(std::ostream& os, const CcdfCurve& curve);
void write_trace_jsonl(std::ostream& os, const std::vector<MetricsLog::TraceEvent>& trace);
void write_exit_times_csv(std::ostream& os, const std::vector<ExitTimeResult>& rows);
void write_scaling_csv(std::ostream& os, const ScalingResult& result);

// Refuses to overwrite an existing artifact unless forced.
void require_fresh(const std::string& path, bool force);

}  // namespace sparselb
