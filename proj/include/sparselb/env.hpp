#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparselb/approx.hpp"
#include "sparselb/comm.hpp"
#include "sparselb/input_stream.hpp"
#include "sparselb/metrics.hpp"
#include "sparselb/routing.hpp"

namespace sparselb {

enum class EngineKind { slot, event };

// One experiment cell: environment, routing policy, communication pattern and
// approximation algorithm, all pinned by a seed.
struct EnvConfig {
  EngineKind engine = EngineKind::slot;
  std::uint32_t servers = 1;
  double horizon = 0.0;  // slots (integer-valued) or continuous time

  // Arrivals. Slot engine: one Bernoulli(lambda) draw per slot. Event
  // engine: renewal process time-changed through the rate profile.
  double lambda = 0.0;
  std::vector<RatePiece> rate_profile;
  GapLaw gap_law = GapLaw::exponential;

  // Service requirements (nominal work units, shared across policies).
  ServiceSpec service;

  // Per-server work rates for the event engine (work units per unit time).
  // The slot engine always serves one work unit per slot per busy server.
  std::vector<double> mu;

  PolicySpec policy;
  CommSpec comm;
  ApproxSpec approx;  // consulted only when the pattern reports state

  std::uint64_t seed = 1;

  // Event engine extras.
  std::uint64_t initial_backlog = 0;  // jobs pre-loaded per server at time 0
  bool coupled = false;               // run the single-fast-server reference alongside
  std::uint64_t workload_stride = 0;  // keep every n-th workload sample, 0 = none
  bool collect_trace = false;
  bool record_message_times = false;

  double mu_of(ServerId i) const {
    return mu.empty() ? 1.0 : mu[i];
  }
  double total_mu() const {
    if (mu.empty()) return static_cast<double>(servers);
    double s = 0.0;
    for (double m : mu) s += m;
    return s;
  }
  // Job completion rate of a busy server, in jobs per unit time.
  double job_rate(ServerId i) const { return mu_of(i) / service.mean_nominal(); }

  bool has_estimator() const { return comm.kind != CommKind::none; }

  void validate() const;
};

MetricsLog run_slot(const EnvConfig& cfg);
MetricsLog run_event(const EnvConfig& cfg);
MetricsLog run(const EnvConfig& cfg);  // validates, then dispatches on engine

// JCT samples surviving the warmup cut: jobs whose global arrival index is
// at least warmup_fraction * total arrivals.
std::vector<double> jct_after_warmup(const MetricsLog& log, double warmup_fraction);

}  // namespace sparselb
