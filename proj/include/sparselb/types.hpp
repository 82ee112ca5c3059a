#pragma once

#include <cstdint>

namespace sparselb {

using JobId = std::uint64_t;
using ServerId = std::uint32_t;

struct Job {
  JobId id = 0;
  double arrival_time = 0.0;  // slot index in the slot engine, continuous time otherwise
  double requirement = 0.0;   // nominal work units, strictly positive
};

// A server-to-balancer state report. Messages are delivered instantly.
struct MessageEvent {
  double time = 0.0;
  ServerId server = 0;
  std::uint64_t queue_length = 0;  // exact length at send time
};

}  // namespace sparselb
