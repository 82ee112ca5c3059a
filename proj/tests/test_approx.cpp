#include <stdexcept>

#include "doctest.h"
#include "sparselb/approx.hpp"

using namespace sparselb;

namespace {
ApproxSpec basic_spec() { return {ApproxKind::basic, 0, 2.0}; }
ApproxSpec msr_spec(double mean = 2.0) { return {ApproxKind::msr, 0, mean}; }
ApproxSpec msrx_spec(std::uint32_t x, double mean = 2.0) {
  return {ApproxKind::msrx, x, mean};
}
}  // namespace

TEST_CASE("a zero-length message empties the emulation") {
  EmulatedQueue emu(msr_spec());
  emu.on_routed_arrival();
  emu.on_message(0);
  CHECK(emu.estimate() == 0);
  CHECK(emu.emulated_departures() == 0);
  CHECK(emu.arrivals_since_anchor() == 0);
  CHECK(emu.head_remaining() == kNeverDeparts);
}

TEST_CASE("mean-assignment seeds every anchored job with the mean") {
  // Hand FIFO oracle for [2,2,2]: 3 work units finish job 1 and leave 1 unit
  // on job 2; 3 more units finish jobs 2 and 3 exactly.
  EmulatedQueue emu(msr_spec(2.0));
  emu.on_message(3);
  CHECK(emu.estimate() == 3);
  CHECK(emu.advance(3.0) == 1);
  CHECK(emu.head_remaining() == 1.0);
  CHECK(emu.estimate() == 2);
  CHECK(emu.advance(3.0) == 2);
  CHECK(emu.estimate() == 0);
  CHECK(emu.emulated_departures() == 3);
}

TEST_CASE("the pessimistic emulation never departs") {
  EmulatedQueue emu(basic_spec());
  emu.on_message(3);
  CHECK(emu.advance(1e9) == 0);
  CHECK(emu.estimate() == 3);
  emu.on_routed_arrival();
  CHECK(emu.advance(1e9) == 0);
  CHECK(emu.estimate() == 4);  // grows, never shrinks, until the next message
  CHECK(emu.head_remaining() == kNeverDeparts);
}

TEST_CASE("capped assignment gives finite work to the first x-1 jobs only") {
  // Budget x-1 = 2: after a zero-length message, four arrivals get
  // requirements [2, 2, inf, inf].
  EmulatedQueue emu(msrx_spec(3));
  emu.on_message(0);
  for (int k = 0; k < 4; ++k) emu.on_routed_arrival();
  CHECK(emu.estimate() == 4);
  CHECK(emu.advance(1e9) == 2);
  CHECK(emu.estimate() == 2);
  CHECK(emu.advance(1e9) == 0);  // cap reached: no further departures
  CHECK(emu.emulated_departures() == 2);
}

TEST_CASE("a message resets the finite-assignment budget") {
  EmulatedQueue emu(msrx_spec(2));  // budget 1
  emu.on_message(0);
  emu.on_routed_arrival();
  emu.on_routed_arrival();
  CHECK(emu.advance(1e9) == 1);
  emu.on_message(1);  // re-anchor: 1 exact job, budget restored
  CHECK(emu.advance(1e9) == 1);
  CHECK(emu.advance(1e9) == 0);
}

TEST_CASE("partial work leaves the head mid-service") {
  EmulatedQueue emu(msr_spec(2.0));
  emu.on_message(2);
  CHECK(emu.advance(3.0) == 1);  // [2,2] minus 3 units: one done, head at 1
  CHECK(emu.head_remaining() == 1.0);
  CHECK(emu.advance(0.0) == 0);
  CHECK(emu.head_remaining() == 1.0);
}

TEST_CASE("exact head completion pops exactly one job") {
  EmulatedQueue emu(msr_spec(2.0));
  emu.on_message(2);
  emu.complete_head();
  CHECK(emu.estimate() == 1);
  CHECK(emu.emulated_departures() == 1);
  emu.complete_head();
  CHECK_THROWS_AS(emu.complete_head(), std::logic_error);

  EmulatedQueue never(basic_spec());
  never.on_message(1);
  CHECK_THROWS_AS(never.complete_head(), std::logic_error);
}

TEST_CASE("the estimate follows anchor plus arrivals minus departures") {
  EmulatedQueue emu(msr_spec(1.0));
  emu.on_message(5);
  emu.on_routed_arrival();
  emu.on_routed_arrival();
  const std::uint64_t deps = emu.advance(3.0);
  CHECK(deps == 3);
  CHECK(emu.estimate() ==
        emu.anchor_length() + emu.arrivals_since_anchor() - emu.emulated_departures());
  CHECK(emu.estimate() == 4);
}

TEST_CASE("error is the absolute gap between actual and estimate") {
  EmulatedQueue emu(msr_spec(2.0));
  emu.on_message(3);
  CHECK(approximation_error(3, emu) == 0);  // zero right after a message
  CHECK(approximation_error(5, emu) == 2);
  emu.advance(4.0);  // two emulated departures
  CHECK(approximation_error(3, emu) == 2);
  CHECK(approximation_error(0, emu) == 1);
}

TEST_CASE("state comparison detects any divergence") {
  EmulatedQueue a(msr_spec(2.0)), b(msr_spec(2.0));
  a.on_message(2);
  b.on_message(2);
  CHECK(a == b);
  a.advance(1.0);
  CHECK_FALSE(a == b);
  b.advance(1.0);
  CHECK(a == b);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(EmulatedQueue(ApproxSpec{ApproxKind::msr, 0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(EmulatedQueue(ApproxSpec{ApproxKind::msrx, 0, 1.0}),
                  std::invalid_argument);
}
