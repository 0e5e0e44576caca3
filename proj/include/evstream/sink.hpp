#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "evstream/adaptation.hpp"
#include "evstream/event.hpp"

namespace evs {

inline constexpr std::uint32_t kTensorSubBins = 10;

// Per-window histogram of shape (2T, H, W): cell (p*T + tau, y, x) counts events of polarity p
// at pixel (x, y) inside temporal sub-bin tau.
struct EventTensor {
  std::uint64_t window_index = 0;
  std::uint32_t sub_bins = kTensorSubBins;
  SensorGeometry geometry;
  std::vector<std::uint32_t> cells;

  std::size_t channels() const noexcept { return 2 * static_cast<std::size_t>(sub_bins); }
  std::size_t offset(std::size_t channel, std::size_t y, std::size_t x) const noexcept {
    return (channel * geometry.height + y) * geometry.width + x;
  }
  std::uint32_t at(std::size_t channel, std::size_t y, std::size_t x) const { return cells.at(offset(channel, y, x)); }
  std::uint64_t total() const noexcept;
};

// Throws Data for events outside the geometry or the window.
EventTensor build_tensor(const EventWindow& window, SensorGeometry geometry,
                         Micros window_length = kDefaultWindowLength, std::uint32_t sub_bins = kTensorSubBins);

// Writes <stem>.bin (little-endian u32, row-major (2T, H, W)) and <stem>.json (shape, geometry,
// window_index).
void write_tensor(const EventTensor& tensor, const std::filesystem::path& stem);

struct RunSummary {
  double max_latency_ms = 0.0;
  double median_latency_ms = 0.0;
  double mean_latency_ms = 0.0;
  double mean_throughput_mbps = 0.0;
  // Total-event loss; absent when the source count is unknown.
  std::optional<double> mean_loss;
  // Mean of per-window loss fractions over windows with a known source count.
  std::optional<double> mean_window_loss;
  std::uint64_t windows = 0;
  std::uint64_t received_events = 0;
  std::uint64_t received_bytes = 0;
  std::optional<std::uint64_t> source_events;
  std::vector<WindowMetrics> series;
};

// Throws NoData for an empty series. Order of the series does not matter.
RunSummary summarize(std::span<const WindowMetrics> series, Micros wall_duration,
                     std::optional<std::uint64_t> source_events = std::nullopt);

// window_index,latency_us,received_events,received_bytes,subscribed_tracks,chunk_size
void write_metrics_csv(std::ostream& out, std::span<const WindowMetrics> series);
void write_metrics_csv(const std::filesystem::path& path, std::span<const WindowMetrics> series);
std::vector<WindowMetrics> read_metrics_csv(std::istream& in);
std::vector<WindowMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace evs
