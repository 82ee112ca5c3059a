#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparselb/types.hpp"

namespace sparselb {

// Tail curve over the observed support: tail[i] = P(X > values[i]).
struct CcdfCurve {
  std::vector<double> values;  // sorted, unique
  std::vector<double> tail;

  // P(X > v) for arbitrary v; 1 below the support, 0 at or above its top.
  double eval(double v) const;
  bool empty() const { return values.empty(); }
};

CcdfCurve make_ccdf(std::vector<double> samples);

// Fraction of the merged support grid on which curve a sits at or below
// curve b. 1.0 means a dominates b everywhere (stochastically smaller).
double ccdf_dominance_fraction(const CcdfCurve& a, const CcdfCurve& b);

struct SummaryStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p99 = 0.0;
};

SummaryStats summarize(std::vector<double> samples);

// Everything one run records. Counters are exact and never filtered; JCT
// summaries apply the warmup cut by global arrival index.
struct MetricsLog {
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_digest = 0;

  std::uint64_t arrivals = 0;
  std::uint64_t departures = 0;
  std::uint64_t messages = 0;
  std::vector<std::uint64_t> per_server_arrivals;
  std::vector<std::uint64_t> per_server_departures;
  std::vector<std::uint64_t> per_server_messages;

  // Approximation error, sampled at slot boundaries / after event batches.
  std::map<std::uint64_t, std::uint64_t> ae_hist;  // max-over-servers value -> samples
  std::uint64_t sup_aq = 0;

  std::vector<double> jct;                       // completion - arrival
  std::vector<std::uint64_t> jct_arrival_index;  // global arrival index per jct entry

  double queue_time_integral = 0.0;  // sum over servers of integral Q_i dt

  // Coupled workload comparison: gap(t) = sum_i W_i(t) - W_ref(t), sampled
  // at every boundary/event; retained series decimated by `stride`.
  bool coupled = false;
  double gap_min = 0.0;
  double gap_max = 0.0;
  std::vector<double> workload_sample_times;
  std::vector<double> workload_sum_samples;
  std::vector<double> workload_ref_samples;

  // Scaling statistics (event engine): running sups over sample times.
  double sup_queue_spread = 0.0;  // max_i Q_i - min_i Q_i

  // Protocol message instants (accounting-only charges are not messages).
  std::vector<std::vector<double>> per_server_message_times;

  // Optional event trace for trace.jsonl.
  struct TraceEvent {
    double time;
    char kind;  // 'a' arrival, 'd' departure, 'm' message
    ServerId server;
    std::uint64_t payload;  // job id or reported queue length
  };
  bool collect_trace = false;
  std::vector<TraceEvent> trace;

  // Invariant violations detected during the run; all zero on a sound run.
  std::map<std::string, std::uint64_t> violations;

  void bump(const std::string& key) { ++violations[key]; }
  std::uint64_t total_violations() const;
};

std::optional<double> mean_of(const std::vector<double>& v);

}  // namespace sparselb
