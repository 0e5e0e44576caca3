#pragma once

#include <cstdint>
#include <optional>

#include "evstream/event.hpp"
#include "evstream/units.hpp"

namespace evs {

struct BandwidthBudget {
  Bandwidth bandwidth;
  Micros window_length = kDefaultWindowLength;
  std::uint64_t event_bits = kEventBits;
  std::uint64_t events_per_window = 0;
};

// floor(bps * window_seconds / event_bits). Throws Parameter for a zero bandwidth.
std::uint64_t budget_events(Bandwidth bandwidth, Micros window_length = kDefaultWindowLength);
// Mbps overload; rejects non-positive values.
std::uint64_t budget_events(double bandwidth_mbps, Micros window_length = kDefaultWindowLength);

BandwidthBudget make_budget(Bandwidth bandwidth, Micros window_length = kDefaultWindowLength);

// Keeps the first min(size, budget) events.
EventWindow truncate_tail(const EventWindow& window, std::uint64_t budget);

enum class BinSelection { Earliest, SeededRandom };

struct EvenSamplingOptions {
  std::uint32_t sub_bins = 10;
  Micros window_length = kDefaultWindowLength;
  BinSelection selection = BinSelection::Earliest;
  std::uint64_t seed = 0;
};

// Spreads the budget across equal temporal sub-bins. Bin i gets budget / sub_bins, plus
// one of the remainder if i < budget % sub_bins. Unused quota flows forward to later bins;
// anything still unused afterwards goes to bins with leftover events, earliest first.
// Keeps exactly min(size, budget) events in source order.
EventWindow sample_even(const EventWindow& window, std::uint64_t budget, const EvenSamplingOptions& options = {});

// Per-bin kept counts that sample_even would produce.
std::vector<std::uint64_t> even_bin_allocation(std::span<const std::uint64_t> bin_counts, std::uint64_t budget);

// (source - kept) / source; 0 for an empty source. Throws Accounting if kept > source.
double loss_rate(std::uint64_t source_count, std::uint64_t kept_count);

enum class ReductionMode { Tail, Even };

struct ReductionStats {
  std::uint64_t window_index = 0;
  std::uint64_t source_events = 0;
  std::uint64_t kept_events = 0;
};

// Applies the per-window budget to a whole stream. Budgets do not roll over.
std::vector<EventWindow> reduce_stream(std::span<const EventWindow> windows, Bandwidth bandwidth, ReductionMode mode,
                                       std::vector<ReductionStats>* stats = nullptr,
                                       Micros window_length = kDefaultWindowLength);

}  // namespace evs
