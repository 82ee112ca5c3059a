#include "sparselb/env.hpp"

#include <algorithm>
#include <cmath>

namespace sparselb {

void EnvConfig::validate() const {
  if (servers < 1) throw std::invalid_argument("need at least one server");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  policy.validate(servers);
  comm.validate();
  if (policy.uses_estimates() && comm.kind == CommKind::none)
    throw std::invalid_argument("routing on estimates needs a communication pattern");
  if (comm.kind != CommKind::none) {
    ApproxSpec a = approx;
    a.mean_requirement = service.mean_nominal();
    if (a.kind == ApproxKind::msrx && a.x == 0) a.x = comm.x;
    a.validate();
  }
  if (!mu.empty() && mu.size() != servers)
    throw std::invalid_argument("mu must be empty or have one rate per server");

  if (engine == EngineKind::slot) {
    if (horizon != std::floor(horizon))
      throw std::invalid_argument("slot engine horizon must be a whole number of slots");
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw std::invalid_argument("slot arrival probability must lie in [0,1]");
    if (!service.integer_valued())
      throw std::invalid_argument(
          "slot engine needs geometric or whole-valued deterministic requirements");
    for (double m : mu)
      if (m != 1.0)
        throw std::invalid_argument("slot engine serves exactly one work unit per slot");
    if (initial_backlog != 0)
      throw std::invalid_argument("initial backlog is an event engine feature");
  } else {
    if (rate_profile.empty() && initial_backlog == 0)
      throw std::invalid_argument("event engine needs a rate profile or an initial backlog");
    for (const auto& piece : rate_profile)
      if (!(piece.rate >= 0.0) || !std::isfinite(piece.rate))
        throw std::invalid_argument("rate profile pieces must have finite nonnegative rates");
    for (double m : mu)
      if (!(m > 0.0)) throw std::invalid_argument("work rates must be positive");
  }
}

MetricsLog run(const EnvConfig& cfg) {
  cfg.validate();
  return cfg.engine == EngineKind::slot ? run_slot(cfg) : run_event(cfg);
}

std::vector<double> jct_after_warmup(const MetricsLog& log, double warmup_fraction) {
  const auto cutoff = static_cast<std::uint64_t>(
      warmup_fraction * static_cast<double>(log.arrivals));
  std::vector<double> kept;
  kept.reserve(log.jct.size());
  for (std::size_t k = 0; k < log.jct.size(); ++k)
    if (log.jct_arrival_index[k] >= cutoff) kept.push_back(log.jct[k]);
  return kept;
}

}  // namespace sparselb
