#include "evstream/token_bucket.hpp"

#include <algorithm>

#include "evstream/error.hpp"

namespace evs {

namespace {
constexpr unsigned __int128 kScale = 1'000'000;
}

std::uint64_t TokenBucket::default_burst_bits(Bandwidth rate, Micros burst_time) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(rate.bps()) *
                                    static_cast<std::uint64_t>(burst_time.count()) / kScale);
}

TokenBucket::TokenBucket(Bandwidth rate, std::uint64_t burst_bits, Micros now)
    : rate_(rate), burst_bits_(burst_bits), capacity_(burst_bits * kScale), tokens_(capacity_), last_refill_(now) {
  if (rate.bps() == 0) fail(ErrorCategory::Parameter, "shaper rate must be positive");
  if (burst_bits == 0) fail(ErrorCategory::Parameter, "shaper burst must be positive");
}

void TokenBucket::refill(Micros now) {
  if (now <= last_refill_) return;
  const auto elapsed = static_cast<unsigned __int128>((now - last_refill_).count());
  tokens_ = std::min(capacity_, tokens_ + elapsed * rate_.bps());
  last_refill_ = now;
}

std::uint64_t TokenBucket::tokens_at(Micros now) {
  refill(now);
  return static_cast<std::uint64_t>(tokens_ / kScale);
}

Micros TokenBucket::admit(std::uint64_t frame_bits, Micros now) {
  Micros t = std::max(now, last_refill_);
  refill(t);
  std::uint64_t remaining = frame_bits;
  while (remaining > 0) {
    const std::uint64_t installment = std::min(remaining, burst_bits_);
    const unsigned __int128 need = installment * kScale;
    if (tokens_ < need) {
      const unsigned __int128 deficit = need - tokens_;
      const auto wait = static_cast<std::int64_t>((deficit + rate_.bps() - 1) / rate_.bps());
      t += Micros{wait};
      refill(t);
    }
    tokens_ -= need;
    remaining -= installment;
  }
  return t;
}

}  // namespace evs
