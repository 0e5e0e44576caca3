#include "evstream/reduction.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "evstream/error.hpp"

namespace evs {

std::uint64_t budget_events(Bandwidth bandwidth, Micros window_length) {
  if (bandwidth.bps() == 0) fail(ErrorCategory::Parameter, "bandwidth must be positive");
  if (window_length.count() <= 0) fail(ErrorCategory::Parameter, "window length must be positive");
  const auto bits = static_cast<unsigned __int128>(bandwidth.bps()) * static_cast<std::uint64_t>(window_length.count());
  return static_cast<std::uint64_t>(bits / (static_cast<unsigned __int128>(1'000'000) * kEventBits));
}

std::uint64_t budget_events(double bandwidth_mbps, Micros window_length) {
  if (!(bandwidth_mbps > 0.0)) {
    fail(ErrorCategory::Parameter, "bandwidth must be positive, got " + std::to_string(bandwidth_mbps));
  }
  return budget_events(Bandwidth::mbps(bandwidth_mbps), window_length);
}

BandwidthBudget make_budget(Bandwidth bandwidth, Micros window_length) {
  return {bandwidth, window_length, kEventBits, budget_events(bandwidth, window_length)};
}

EventWindow truncate_tail(const EventWindow& window, std::uint64_t budget) {
  EventWindow out{window.index, window.start_t, {}};
  const auto keep = static_cast<std::size_t>(std::min<std::uint64_t>(window.events.size(), budget));
  out.events.assign(window.events.begin(), window.events.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

std::vector<std::uint64_t> even_bin_allocation(std::span<const std::uint64_t> bin_counts, std::uint64_t budget) {
  const std::size_t bins = bin_counts.size();
  std::vector<std::uint64_t> kept(bins, 0);
  if (bins == 0) return kept;

  const std::uint64_t base = budget / bins;
  const std::uint64_t remainder = budget % bins;
  std::uint64_t carry = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    const std::uint64_t available = base + (i < remainder ? 1 : 0) + carry;
    kept[i] = std::min(bin_counts[i], available);
    carry = available - kept[i];
  }
  // Forward donation cannot reach earlier bins, so hand back what is left.
  for (std::size_t i = 0; i < bins && carry > 0; ++i) {
    const std::uint64_t extra = std::min(carry, bin_counts[i] - kept[i]);
    kept[i] += extra;
    carry -= extra;
  }
  return kept;
}

EventWindow sample_even(const EventWindow& window, std::uint64_t budget, const EvenSamplingOptions& options) {
  if (options.sub_bins == 0) fail(ErrorCategory::Parameter, "sample_even needs at least one sub-bin");
  if (window.events.size() <= budget) return window;

  const auto length = static_cast<std::uint64_t>(options.window_length.count());
  const std::uint32_t bins = options.sub_bins;
  auto bin_of = [&](const Event& e) {
    const std::uint64_t offset = e.t - window.start_t;
    return static_cast<std::size_t>(std::min<std::uint64_t>(offset * bins / length, bins - 1));
  };

  // Events are time-sorted, so each bin is a contiguous run.
  std::vector<std::size_t> bin_begin(bins + 1, window.events.size());
  std::vector<std::uint64_t> counts(bins, 0);
  for (std::size_t i = window.events.size(); i-- > 0;) {
    const std::size_t b = bin_of(window.events[i]);
    ++counts[b];
    bin_begin[b] = i;
  }
  for (std::size_t b = bins; b-- > 0;) {
    if (counts[b] == 0) bin_begin[b] = bin_begin[b + 1];
  }

  const std::vector<std::uint64_t> kept = even_bin_allocation(counts, budget);
  EventWindow out{window.index, window.start_t, {}};
  out.events.reserve(budget);
  std::mt19937_64 rng(options.seed ^ window.index);
  for (std::size_t b = 0; b < bins; ++b) {
    const auto first = window.events.begin() + static_cast<std::ptrdiff_t>(bin_begin[b]);
    if (options.selection == BinSelection::Earliest) {
      out.events.insert(out.events.end(), first, first + static_cast<std::ptrdiff_t>(kept[b]));
    } else {
      std::sample(first, first + static_cast<std::ptrdiff_t>(counts[b]), std::back_inserter(out.events),
                  static_cast<std::ptrdiff_t>(kept[b]), rng);
    }
  }
  return out;
}

double loss_rate(std::uint64_t source_count, std::uint64_t kept_count) {
  if (kept_count > source_count) {
    fail(ErrorCategory::Accounting, "kept count " + std::to_string(kept_count) + " exceeds source count " +
                                        std::to_string(source_count));
  }
  if (source_count == 0) return 0.0;
  return static_cast<double>(source_count - kept_count) / static_cast<double>(source_count);
}

std::vector<EventWindow> reduce_stream(std::span<const EventWindow> windows, Bandwidth bandwidth, ReductionMode mode,
                                       std::vector<ReductionStats>* stats, Micros window_length) {
  const std::uint64_t budget = budget_events(bandwidth, window_length);
  EvenSamplingOptions options;
  options.window_length = window_length;

  std::vector<EventWindow> reduced;
  reduced.reserve(windows.size());
  for (const EventWindow& w : windows) {
    reduced.push_back(mode == ReductionMode::Tail ? truncate_tail(w, budget) : sample_even(w, budget, options));
    if (stats) stats->push_back({w.index, w.events.size(), reduced.back().events.size()});
  }
  return reduced;
}

}  // namespace evs
