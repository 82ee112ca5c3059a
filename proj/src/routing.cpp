#include "sparselb/routing.hpp"

namespace sparselb {

namespace {

// Argmin over the first `count` entries of state.scratch; tie set gathered in
// index order so random tie draws are reproducible. Draws from the RNG only
// when the minimum is shared and the tie break is random.
ServerId pick_min(const PolicySpec& spec, const std::vector<std::uint64_t>& queues,
                  std::size_t count, RoutingState& state) {
  std::uint64_t best = queues[state.scratch[0]];
  for (std::size_t j = 1; j < count; ++j) best = std::min(best, queues[state.scratch[j]]);
  std::size_t ties = 0;
  for (std::size_t j = 0; j < count; ++j) {
    const ServerId c = state.scratch[j];
    if (queues[c] == best) state.scratch[ties++] = c;
  }
  if (ties == 1 || spec.tie_break == TieBreak::lowest_index) {
    ServerId lowest = state.scratch[0];
    for (std::size_t j = 1; j < ties; ++j) lowest = std::min(lowest, state.scratch[j]);
    return lowest;
  }
  return state.scratch[state.rng.below(ties)];
}

}  // namespace

ServerId route(const PolicySpec& spec, const std::vector<std::uint64_t>& queues,
               RoutingState& state) {
  const auto servers = static_cast<ServerId>(queues.size());
  switch (spec.kind) {
    case PolicyKind::jsq:
    case PolicyKind::jsaq: {
      state.scratch.resize(servers);
      for (ServerId i = 0; i < servers; ++i) state.scratch[i] = i;
      return pick_min(spec, queues, servers, state);
    }
    case PolicyKind::sqd: {
      // Partial Fisher-Yates: the first d entries become a uniform sample
      // without replacement.
      state.scratch.resize(servers);
      for (ServerId i = 0; i < servers; ++i) state.scratch[i] = i;
      for (std::uint32_t j = 0; j < spec.d; ++j) {
        const auto pick = j + state.rng.below(servers - j);
        std::swap(state.scratch[j], state.scratch[pick]);
      }
      return pick_min(spec, queues, spec.d, state);
    }
    case PolicyKind::round_robin:
      return static_cast<ServerId>(state.rr_cursor++ % servers);
    case PolicyKind::random_uniform:
      return static_cast<ServerId>(state.rng.below(servers));
  }
  throw std::logic_error("unreachable policy kind");
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::jsq: return "jsq";
    case PolicyKind::jsaq: return "jsaq";
    case PolicyKind::sqd: return "sqd";
    case PolicyKind::round_robin: return "round_robin";
    case PolicyKind::random_uniform: return "random";
  }
  return "?";
}

}  // namespace sparselb
