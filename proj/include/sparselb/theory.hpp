#pragma once

#include <cstdint>
#include <vector>

#include "sparselb/env.hpp"

namespace sparselb {

// Monte Carlo mean with a 95% normal-approximation halfwidth.
struct MeanEstimate {
  std::uint64_t count = 0;
  double mean = 0.0;
  double ci_halfwidth = 0.0;
};

MeanEstimate estimate_mean(const std::vector<double>& samples);

// First exit times of a rate-mu Poisson count against its drift line:
//   tracking:  inf{t : |N(t) - floor(mu t)| = y}
//   deviation: inf{t : |N(t) - mu t| >= y}
// Simulated on the exact event grid (Poisson jumps and drift ticks), no time
// stepping. Lower bounds: E[tracking] >= (y^2 - y)/mu, E[deviation] >= y^2/mu.
struct ExitTimeResult {
  double mu = 1.0;
  std::uint64_t y = 1;
  std::uint64_t trials = 0;
  MeanEstimate tracking;
  MeanEstimate deviation;
  double tracking_bound = 0.0;
  double deviation_bound = 0.0;
};

ExitTimeResult poisson_exit_times(double mu, std::uint64_t y, std::uint64_t trials,
                                  std::uint64_t seed);

// Inter-message durations of one server running the error-triggered pattern
// with mean-service emulation on exponential service. With infinite_backlog
// the server is pre-loaded so it never idles and arrivals are disabled;
// otherwise a Poisson(lambda) feed drives it. Intervals start at time zero
// and at each message; the interval cut off by the horizon is discarded.
struct IntermessageResult {
  std::uint32_t x = 2;
  double mu = 1.0;
  bool infinite_backlog = false;
  std::uint64_t intervals = 0;
  MeanEstimate all_intervals;
  MeanEstimate first_intervals;  // one sample per trial
  double bound_backlog = 0.0;    // x(x-1)/mu, needs infinite backlog
  double bound_general = 0.0;    // (x/2 - 1)^2 / mu, any arrivals
};

IntermessageResult intermessage_durations(std::uint32_t x, double mu, double lambda,
                                          bool infinite_backlog, double horizon,
                                          std::uint32_t trials, std::uint64_t seed);

// Heavy-traffic scaling sweep: arrival rates and work rates grow linearly in
// n while the horizon stays fixed; each run records the queue-spread and
// workload-gap sups, normalized by sqrt(n).
struct ScalingConfig {
  std::vector<std::uint64_t> n_values{64, 256, 1024};
  std::uint32_t servers = 4;
  std::vector<double> mu_bar;                      // defaults to all ones
  std::vector<RatePiece> lambda_bar{{0.0, 4.0}};   // unscaled profile
  double horizon = 4.0;
  std::uint32_t replications = 20;
  std::uint32_t x = 3;
  ServiceSpec service{ServiceLaw::bounded_uniform, 1.0, 0.5, 1.5};
  std::uint64_t seed = 1;
  std::uint32_t threads = 1;

  double mu_bar_of(std::uint32_t i) const { return mu_bar.empty() ? 1.0 : mu_bar[i]; }
  void validate() const;
};

struct ScalingPoint {
  std::uint64_t n = 0;
  std::uint32_t replications = 0;
  double spread_median = 0.0;    // sup_t (max_i Q_i - min_i Q_i) / sqrt(n)
  double workload_median = 0.0;  // sup_t (sum_i W_i - W_ref) / sqrt(n)
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
};

ScalingResult run_scaling_suite(const ScalingConfig& cfg);

// Spearman rank correlation; NaN-free inputs, returns 0 for degenerate ranks.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace sparselb
