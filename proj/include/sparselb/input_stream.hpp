#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sparselb/rng.hpp"
#include "sparselb/types.hpp"

namespace sparselb {

enum class ServiceLaw { geometric, deterministic, exponential, bounded_uniform };

struct ServiceSpec {
  ServiceLaw law = ServiceLaw::geometric;
  double mean = 30.0;  // mean nominal requirement, work units
  double lo = 0.0;     // bounded_uniform support
  double hi = 0.0;

  double p() const { return 1.0 / mean; }  // geometric success probability

  // Mean of the law in nominal work units.
  double mean_nominal() const {
    return law == ServiceLaw::bounded_uniform ? 0.5 * (lo + hi) : mean;
  }

  bool integer_valued() const {
    return law == ServiceLaw::geometric ||
           (law == ServiceLaw::deterministic && mean == std::floor(mean));
  }
};

// Law of the gaps of the unscaled arrival renewal process (mean forced to 1).
enum class GapLaw { exponential, deterministic, uniform_half_width };

// One piece of a piecewise-constant arrival rate profile. Pieces are sorted
// by start time; the last piece extends to the horizon.
struct RatePiece {
  double start = 0.0;
  double rate = 0.0;
};

// Pre-committed randomness for one experiment cell. Both arrival epochs and
// per-job requirements are pure functions of the master seed, so every policy
// replaying the same cell consumes byte-identical inputs, and requirement_of
// gives O(1) random access by job id.
class InputStream {
 public:
  // Slot mode: at most one arrival per slot, with probability lambda.
  InputStream(std::uint64_t master_seed, ServiceSpec service, double lambda);

  // Event mode: a rate-1 renewal process with the given gap law, time-changed
  // through the integral of the rate profile.
  InputStream(std::uint64_t master_seed, ServiceSpec service,
              std::vector<RatePiece> profile, GapLaw gap_law);

  double requirement_of(JobId id) const;
  bool arrival_in_slot(std::uint64_t slot) const;  // slot mode, slots count from 1
  double lambda() const { return lambda_; }
  const ServiceSpec& service() const { return service_; }
  const std::vector<RatePiece>& profile() const { return profile_; }
  std::uint64_t master_seed() const { return master_seed_; }

  // Gap of the unscaled renewal process before arrival k (k counts from 0).
  double base_gap(std::uint64_t k) const;

 private:
  std::uint64_t master_seed_ = 0;
  ServiceSpec service_;
  double lambda_ = 0.0;                // slot mode
  std::vector<RatePiece> profile_;     // event mode
  GapLaw gap_law_ = GapLaw::exponential;
};

// Walks the arrival epochs of an event-mode stream in order. Epochs are the
// preimage of the cumulative base-process times under the integrated rate
// profile; zero-rate pieces produce no arrivals.
class ArrivalSequence {
 public:
  explicit ArrivalSequence(const InputStream& in);

  // Next arrival epoch, or +infinity once past the last finite time the
  // profile can produce.
  double next();

  std::uint64_t emitted() const { return k_; }

 private:
  const InputStream* in_;
  std::uint64_t k_ = 0;    // arrivals emitted so far
  double s_ = 0.0;         // cumulative base-process time
  std::size_t piece_ = 0;  // current profile piece
  double piece_s_ = 0.0;   // integrated rate at the start of the current piece
};

// FNV-1a over the raw bytes of the consumed inputs. Equal digests certify
// that two runs saw the same arrival epochs and requirements.
class StreamDigest {
 public:
  void add_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xff;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add_double(double v);
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace sparselb
