#pragma once

#include <cmath>
#include <cstdint>

namespace evs {

// Link or budget rate, stored as whole bits per second so budget math stays exact.
class Bandwidth {
 public:
  constexpr Bandwidth() = default;

  static constexpr Bandwidth bits_per_second(std::uint64_t bps) { return Bandwidth(bps); }
  static Bandwidth mbps(double megabits) {
    return Bandwidth(static_cast<std::uint64_t>(std::llround(megabits * 1e6)));
  }

  constexpr std::uint64_t bps() const noexcept { return bps_; }
  constexpr double as_mbps() const noexcept { return static_cast<double>(bps_) / 1e6; }

  friend constexpr bool operator==(Bandwidth, Bandwidth) = default;
  friend constexpr auto operator<=>(Bandwidth, Bandwidth) = default;

 private:
  explicit constexpr Bandwidth(std::uint64_t bps) : bps_(bps) {}
  std::uint64_t bps_ = 0;
};

}  // namespace evs
