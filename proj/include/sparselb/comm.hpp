#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "sparselb/approx.hpp"
#include "sparselb/types.hpp"

namespace sparselb {

// When a server reports its queue length.
//   rt: on a fixed timer, `rate` messages per unit time.
//   dt: immediately after every x-th departure since the last message.
//   et: as soon as the server's replica of the balancer's estimate drifts
//       x or more away from its true queue length.
enum class CommKind { none, rt, dt, et };

struct CommSpec {
  CommKind kind = CommKind::none;
  std::uint32_t x = 0;  // dt/et threshold
  double rate = 0.0;    // rt messages per unit time, per server

  void validate() const {
    if ((kind == CommKind::dt || kind == CommKind::et) && x < 1)
      throw std::invalid_argument("dt/et need x >= 1");
    if (kind == CommKind::rt && !(rate > 0.0))
      throw std::invalid_argument("rt needs a positive rate");
  }
};

// Per-server protocol state, kept at the server side. Under et the server
// replays the balancer's emulation from what it can observe locally (its own
// queue, its own arrivals, the messages it sent), so `mirror` must stay
// bit-equal to the balancer's emulated queue at all times.
struct ServerCommState {
  double last_message_time = 0.0;
  std::uint64_t departures_since_message = 0;
  EmulatedQueue mirror;
};

// Timer period in whole slots for the slot engine.
inline std::uint64_t rt_period_slots(double rate) {
  const auto p = static_cast<std::uint64_t>(std::llround(1.0 / rate));
  return p < 1 ? 1 : p;
}

// Decides in the communication phase whether the server reports now. The et
// trigger fires on error >= x so a step past the threshold cannot slip
// through. The rt branch is the slot engine's whole-slot period; the event
// engine schedules exact timers at k/rate instead of polling this.
inline bool should_message(const CommSpec& spec, const ServerCommState& st,
                           std::uint64_t actual_queue, double now) {
  switch (spec.kind) {
    case CommKind::none:
      return false;
    case CommKind::rt:
      return now - st.last_message_time >=
             static_cast<double>(rt_period_slots(spec.rate));
    case CommKind::dt:
      return st.departures_since_message >= spec.x;
    case CommKind::et:
      return approximation_error(actual_queue, st.mirror) >= spec.x;
  }
  return false;
}

// Sends the report and resets the interval state on the server side. The
// caller delivers the returned event to the balancer instantly.
inline MessageEvent emit_message(const CommSpec& spec, ServerCommState& st,
                                 std::uint64_t actual_queue, ServerId server, double now) {
  st.last_message_time = now;
  st.departures_since_message = 0;
  if (spec.kind == CommKind::et) st.mirror.on_message(actual_queue);
  return MessageEvent{now, server, actual_queue};
}

// M(T)/D(T); undefined until something departs.
inline std::optional<double> relative_communication(std::uint64_t messages,
                                                    std::uint64_t departures) {
  if (departures == 0) return std::nullopt;
  return static_cast<double>(messages) / static_cast<double>(departures);
}

}  // namespace sparselb
