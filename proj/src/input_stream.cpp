#include "sparselb/input_stream.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace sparselb {

namespace {
constexpr std::uint64_t kReqTag = 0x7265717569726531ULL;
constexpr std::uint64_t kSlotTag = 0x736c6f7461727231ULL;
constexpr std::uint64_t kGapTag = 0x6761706472617731ULL;

void validate_service(const ServiceSpec& s) {
  switch (s.law) {
    case ServiceLaw::geometric:
    case ServiceLaw::deterministic:
    case ServiceLaw::exponential:
      if (!(s.mean > 0.0)) throw std::invalid_argument("service mean must be positive");
      break;
    case ServiceLaw::bounded_uniform:
      if (!(s.lo > 0.0) || !(s.hi >= s.lo))
        throw std::invalid_argument("bounded_uniform needs 0 < lo <= hi");
      break;
  }
}
}  // namespace

InputStream::InputStream(std::uint64_t master_seed, ServiceSpec service, double lambda)
    : master_seed_(master_seed), service_(service), lambda_(lambda) {
  validate_service(service_);
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("slot arrival probability must lie in [0,1]");
}

InputStream::InputStream(std::uint64_t master_seed, ServiceSpec service,
                         std::vector<RatePiece> profile, GapLaw gap_law)
    : master_seed_(master_seed),
      service_(service),
      profile_(std::move(profile)),
      gap_law_(gap_law) {
  validate_service(service_);
  if (profile_.empty()) throw std::invalid_argument("rate profile must not be empty");
  if (profile_.front().start != 0.0)
    throw std::invalid_argument("rate profile must start at time 0");
  for (std::size_t i = 0; i < profile_.size(); ++i) {
    if (!(profile_[i].rate >= 0.0) || !std::isfinite(profile_[i].rate))
      throw std::invalid_argument("rate profile pieces must have finite nonnegative rates");
    if (i > 0 && !(profile_[i].start > profile_[i - 1].start))
      throw std::invalid_argument("rate profile pieces must have increasing start times");
  }
}

double InputStream::requirement_of(JobId id) const {
  Rng r(derive_seed(master_seed_, kReqTag, id));
  switch (service_.law) {
    case ServiceLaw::geometric:
      return static_cast<double>(r.geometric(service_.p()));
    case ServiceLaw::deterministic:
      return service_.mean;
    case ServiceLaw::exponential:
      return r.exponential(1.0 / service_.mean);
    case ServiceLaw::bounded_uniform:
      return r.uniform(service_.lo, service_.hi);
  }
  return service_.mean;
}

bool InputStream::arrival_in_slot(std::uint64_t slot) const {
  if (lambda_ <= 0.0) return false;
  if (lambda_ >= 1.0) return true;
  Rng r(derive_seed(master_seed_, kSlotTag, slot));
  return r.next_unit() < lambda_;
}

double InputStream::base_gap(std::uint64_t k) const {
  Rng r(derive_seed(master_seed_, kGapTag, k));
  switch (gap_law_) {
    case GapLaw::exponential:
      return r.exponential(1.0);
    case GapLaw::deterministic:
      return 1.0;
    case GapLaw::uniform_half_width:
      return r.uniform(0.5, 1.5);
  }
  return 1.0;
}

ArrivalSequence::ArrivalSequence(const InputStream& in) : in_(&in) {}

double ArrivalSequence::next() {
  const auto& pieces = in_->profile();
  s_ += in_->base_gap(k_);
  // Find the piece whose integrated rate covers s_, accumulating integrals
  // forward; the cursor only ever moves right.
  while (true) {
    const double rate = pieces[piece_].rate;
    const bool last = piece_ + 1 == pieces.size();
    if (rate > 0.0) {
      const double piece_integral =
          last ? std::numeric_limits<double>::infinity()
               : rate * (pieces[piece_ + 1].start - pieces[piece_].start);
      if (s_ - piece_s_ <= piece_integral) {
        ++k_;
        return pieces[piece_].start + (s_ - piece_s_) / rate;
      }
      piece_s_ += piece_integral;
    }
    if (last) {
      // Zero-rate tail: no arrival can ever be produced again.
      return std::numeric_limits<double>::infinity();
    }
    ++piece_;
  }
}

void StreamDigest::add_double(double v) { add_u64(std::bit_cast<std::uint64_t>(v)); }

}  // namespace sparselb
