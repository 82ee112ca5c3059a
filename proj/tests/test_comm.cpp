#include "doctest.h"
#include "sparselb/comm.hpp"

using namespace sparselb;

TEST_CASE("departure counting fires on exactly the x-th departure") {
  const CommSpec dt{CommKind::dt, 3, 0.0};
  ServerCommState st;
  st.departures_since_message = 2;
  CHECK_FALSE(should_message(dt, st, 5, 10.0));
  st.departures_since_message = 3;
  CHECK(should_message(dt, st, 5, 10.0));
  st.departures_since_message = 7;  // late checks still fire
  CHECK(should_message(dt, st, 5, 10.0));
}

TEST_CASE("a server is quiet immediately after its own report") {
  const CommSpec et{CommKind::et, 2, 0.0};
  ServerCommState st;
  st.mirror = EmulatedQueue({ApproxKind::msr, 0, 2.0});
  st.mirror.on_message(0);
  for (int k = 0; k < 2; ++k) st.mirror.on_routed_arrival();
  // Estimate 2, actual 4: error 2 reaches the threshold.
  CHECK(should_message(et, st, 4, 1.0));
  const MessageEvent msg = emit_message(et, st, 4, 0, 1.0);
  CHECK(msg.queue_length == 4);
  CHECK(msg.server == 0);
  CHECK(msg.time == 1.0);
  CHECK(st.last_message_time == 1.0);
  CHECK(st.departures_since_message == 0);
  CHECK(approximation_error(4, st.mirror) == 0);
  CHECK_FALSE(should_message(et, st, 4, 1.0));
}

TEST_CASE("error tracking stays quiet below the threshold") {
  const CommSpec et{CommKind::et, 3, 0.0};
  ServerCommState st;
  st.mirror = EmulatedQueue({ApproxKind::basic, 0, 1.0});
  st.mirror.on_message(1);
  CHECK_FALSE(should_message(et, st, 1, 0.0));  // error 0
  CHECK_FALSE(should_message(et, st, 3, 0.0));  // error 2
  CHECK(should_message(et, st, 4, 0.0));        // error 3 = x
}

TEST_CASE("timer periods round to whole slots") {
  // K=30, x=3, per-slot arrival probability 0.95: period = round(90/0.95).
  CHECK(rt_period_slots(0.95 / 90.0) == 95);
  CHECK(rt_period_slots(0.5 / 90.0) == 180);
  CHECK(rt_period_slots(1.0) == 1);
  CHECK(rt_period_slots(3.0) == 1);  // never less than one slot

  const CommSpec rt{CommKind::rt, 0, 1.0 / 4.0};
  ServerCommState st;
  st.last_message_time = 8.0;
  CHECK_FALSE(should_message(rt, st, 0, 11.0));
  CHECK(should_message(rt, st, 0, 12.0));
}

TEST_CASE("relative communication is messages per departure") {
  CHECK_FALSE(relative_communication(0, 0).has_value());
  CHECK(relative_communication(3, 9).value() == doctest::Approx(1.0 / 3.0));
  CHECK(relative_communication(9, 9).value() == 1.0);
  CHECK(relative_communication(0, 5).value() == 0.0);
}

TEST_CASE("the silent pattern never messages") {
  const CommSpec none{CommKind::none, 0, 0.0};
  ServerCommState st;
  st.departures_since_message = 1000;
  CHECK_FALSE(should_message(none, st, 1000, 1e9));
}

TEST_CASE("malformed patterns are rejected") {
  CHECK_THROWS_AS((CommSpec{CommKind::dt, 0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CommSpec{CommKind::rt, 0, 0.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((CommSpec{CommKind::none, 0, 0.0}.validate()));
  CHECK_NOTHROW((CommSpec{CommKind::et, 2, 0.0}.validate()));
}
