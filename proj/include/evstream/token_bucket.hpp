#pragma once

#include <cstdint>

#include "evstream/event.hpp"
#include "evstream/units.hpp"

namespace evs {

// Token bucket shaper in exact integer arithmetic. Tokens are tracked in bit-microseconds
// (bits * 1e6), which makes a refill of `rate` units per microsecond.
class TokenBucket {
 public:
  // burst defaults to 100 ms worth of bits at the configured rate.
  static std::uint64_t default_burst_bits(Bandwidth rate, Micros burst_time = Micros{100'000});

  TokenBucket(Bandwidth rate, std::uint64_t burst_bits, Micros now = Micros{0});

  // Earliest time the frame has fully passed the shaper, given it is offered at `now`.
  // Deducts the tokens. Frames above the burst size go through in burst-sized installments.
  Micros admit(std::uint64_t frame_bits, Micros now);

  // Current token level in bits (rounded down) after refilling to `now`.
  std::uint64_t tokens_at(Micros now);

  Bandwidth rate() const noexcept { return rate_; }
  std::uint64_t burst_bits() const noexcept { return burst_bits_; }
  Micros last_refill() const noexcept { return last_refill_; }

 private:
  void refill(Micros now);

  Bandwidth rate_;
  std::uint64_t burst_bits_;
  unsigned __int128 capacity_;  // burst_bits * 1e6
  unsigned __int128 tokens_;
  Micros last_refill_;
};

// shaper_admit as a free function over a bucket.
inline Micros shaper_admit(TokenBucket& bucket, std::uint64_t frame_bits, Micros now) {
  return bucket.admit(frame_bits, now);
}

}  // namespace evs
