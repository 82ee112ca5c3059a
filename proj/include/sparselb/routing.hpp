#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparselb/rng.hpp"
#include "sparselb/types.hpp"

namespace sparselb {

// jsq routes on exact queue lengths, jsaq on the balancer's estimates; the
// two coincide when the estimates are exact. sqd samples d servers without
// replacement and takes the shortest of those.
enum class PolicyKind { jsq, jsaq, sqd, round_robin, random_uniform };

enum class TieBreak { random, lowest_index };

struct PolicySpec {
  PolicyKind kind = PolicyKind::jsaq;
  std::uint32_t d = 2;  // sqd sample size
  TieBreak tie_break = TieBreak::random;

  void validate(std::uint32_t servers) const {
    if (kind == PolicyKind::sqd && (d < 1 || d > servers))
      throw std::invalid_argument("sqd needs 1 <= d <= server count");
  }
  bool uses_estimates() const { return kind == PolicyKind::jsaq; }
  bool charges_message_per_departure() const {
    return kind == PolicyKind::jsq || kind == PolicyKind::sqd;
  }
};

struct RoutingState {
  Rng rng;          // policy-local stream; the input stream is never touched
  std::uint64_t rr_cursor = 0;
  std::vector<ServerId> scratch;  // sqd sampling / tie collection

  explicit RoutingState(std::uint64_t seed) : rng(seed) {}
};

// Picks the destination for one arrival. `queues` holds exact lengths for
// jsq/sqd and estimates for jsaq; it is ignored by round_robin/random. RNG
// consumption: one draw per tie among jsq/jsaq minima, d draws plus one per
// tie for sqd, one draw for random_uniform, none otherwise. Identical views
// and identical RNG state therefore give identical decisions.
ServerId route(const PolicySpec& spec, const std::vector<std::uint64_t>& queues,
               RoutingState& state);

std::string to_string(PolicyKind k);

}  // namespace sparselb
