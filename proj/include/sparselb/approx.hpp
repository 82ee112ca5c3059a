#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>

namespace sparselb {

// How the balancer guesses service requirements for jobs it cannot observe.
//   basic: every emulated job lasts forever, so the estimate never drops.
//   msr:   every emulated job gets the mean requirement.
//   msrx:  the first x-1 jobs per interval get the mean, the rest last
//          forever; equivalently, at most x-1 emulated departures between
//          consecutive messages.
enum class ApproxKind { basic, msr, msrx };

struct ApproxSpec {
  ApproxKind kind = ApproxKind::msr;
  std::uint32_t x = 0;             // msrx finite budget is x-1 per interval
  double mean_requirement = 1.0;   // work units per emulated job

  void validate() const {
    if (!(mean_requirement > 0.0))
      throw std::invalid_argument("mean_requirement must be positive");
    if (kind == ApproxKind::msrx && x < 1)
      throw std::invalid_argument("msrx needs x >= 1");
  }
};

inline constexpr double kNeverDeparts = std::numeric_limits<double>::infinity();

// The balancer's stand-in for one server: a single FIFO queue simulated
// forward from the last message. Re-anchored whenever a message arrives;
// appended whenever a job is routed to the real server. Queue estimate at any
// time is anchor length + arrivals since - emulated departures since.
class EmulatedQueue {
 public:
  EmulatedQueue() = default;
  explicit EmulatedQueue(ApproxSpec spec) : spec_(spec) { spec_.validate(); }

  // Message received: discard the interval and restart from exact state.
  void on_message(std::uint64_t queue_length) {
    fifo_.clear();
    anchor_length_ = queue_length;
    arrivals_ = 0;
    departures_ = 0;
    finite_assigned_ = 0;
    for (std::uint64_t j = 0; j < queue_length; ++j) fifo_.push_back(assign());
  }

  void on_routed_arrival() {
    ++arrivals_;
    fifo_.push_back(assign());
  }

  // Drains the emulated server by `work` work units; idle emulated time just
  // passes. Returns the number of emulated departures produced.
  std::uint64_t advance(double work) {
    std::uint64_t deps = 0;
    while (work > 0.0 && !fifo_.empty() && fifo_.front() != kNeverDeparts) {
      if (fifo_.front() <= work) {
        work -= fifo_.front();
        fifo_.pop_front();
        ++departures_;
        ++deps;
      } else {
        fifo_.front() -= work;
        work = 0.0;
      }
    }
    return deps;
  }

  // Pops the head outright. Event-driven callers schedule head completions at
  // exact times and complete them here, avoiding float residue.
  void complete_head() {
    if (fifo_.empty() || fifo_.front() == kNeverDeparts)
      throw std::logic_error("no finite head to complete");
    fifo_.pop_front();
    ++departures_;
  }

  std::uint64_t estimate() const { return fifo_.size(); }
  std::uint64_t emulated_departures() const { return departures_; }
  std::uint64_t arrivals_since_anchor() const { return arrivals_; }
  std::uint64_t anchor_length() const { return anchor_length_; }
  double head_remaining() const { return fifo_.empty() ? kNeverDeparts : fifo_.front(); }
  const ApproxSpec& spec() const { return spec_; }

  bool operator==(const EmulatedQueue& other) const {
    return anchor_length_ == other.anchor_length_ && arrivals_ == other.arrivals_ &&
           departures_ == other.departures_ &&
           finite_assigned_ == other.finite_assigned_ && fifo_ == other.fifo_;
  }

 private:
  double assign() {
    switch (spec_.kind) {
      case ApproxKind::basic:
        return kNeverDeparts;
      case ApproxKind::msr:
        return spec_.mean_requirement;
      case ApproxKind::msrx:
        if (finite_assigned_ + 1 < spec_.x) {
          ++finite_assigned_;
          return spec_.mean_requirement;
        }
        return kNeverDeparts;
    }
    return kNeverDeparts;
  }

  ApproxSpec spec_;
  std::deque<double> fifo_;  // remaining work per emulated job, FIFO order
  std::uint64_t anchor_length_ = 0;
  std::uint64_t arrivals_ = 0;
  std::uint64_t departures_ = 0;
  std::uint32_t finite_assigned_ = 0;
};

// |Q - Q~| for one server at one instant.
inline std::uint64_t approximation_error(std::uint64_t actual, const EmulatedQueue& emu) {
  const std::uint64_t est = emu.estimate();
  return actual > est ? actual - est : est - actual;
}

}  // namespace sparselb
