#include "evstream/sink.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "evstream/error.hpp"
#include "evstream/reduction.hpp"

namespace evs {

std::uint64_t EventTensor::total() const noexcept {
  return std::accumulate(cells.begin(), cells.end(), std::uint64_t{0});
}

EventTensor build_tensor(const EventWindow& window, SensorGeometry geometry, Micros window_length,
                         std::uint32_t sub_bins) {
  if (sub_bins == 0) fail(ErrorCategory::Parameter, "tensor needs at least one sub-bin");
  EventTensor tensor;
  tensor.window_index = window.index;
  tensor.sub_bins = sub_bins;
  tensor.geometry = geometry;
  tensor.cells.assign(tensor.channels() * geometry.height * geometry.width, 0);

  const auto length = static_cast<std::uint64_t>(window_length.count());
  for (const Event& e : window.events) {
    if (!geometry.contains(e)) {
      fail(ErrorCategory::Data, "event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                    ") outside " + std::to_string(geometry.width) + "x" +
                                    std::to_string(geometry.height));
    }
    if (e.t < window.start_t || e.t - window.start_t >= length) {
      fail(ErrorCategory::Data, "event at t=" + std::to_string(e.t) + " outside window " +
                                    std::to_string(window.index));
    }
    if (e.p > 1) fail(ErrorCategory::Data, "polarity must be 0 or 1");
    const std::uint64_t bin = (e.t - window.start_t) * sub_bins / length;
    ++tensor.cells[tensor.offset(e.p * sub_bins + bin, e.y, e.x)];
  }
  return tensor;
}

void write_tensor(const EventTensor& tensor, const std::filesystem::path& stem) {
  auto bin_path = stem;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) fail(ErrorCategory::Io, "cannot open " + bin_path.string());
  std::vector<std::uint8_t> bytes(tensor.cells.size() * 4);
  for (std::size_t i = 0; i < tensor.cells.size(); ++i) {
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(tensor.cells[i] >> (8 * b));
  }
  bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

  nlohmann::json meta;
  meta["shape"] = {tensor.channels(), tensor.geometry.height, tensor.geometry.width};
  meta["dtype"] = "uint32_le";
  meta["geometry"] = {{"width", tensor.geometry.width}, {"height", tensor.geometry.height}};
  meta["sub_bins"] = tensor.sub_bins;
  meta["window_index"] = tensor.window_index;
  auto json_path = stem;
  json_path += ".json";
  std::ofstream json(json_path);
  if (!json) fail(ErrorCategory::Io, "cannot open " + json_path.string());
  json << meta.dump(2) << '\n';
}

RunSummary summarize(std::span<const WindowMetrics> series, Micros wall_duration,
                     std::optional<std::uint64_t> source_events) {
  if (series.empty()) fail(ErrorCategory::NoData, "no reconstructed windows to summarize");

  RunSummary summary;
  summary.series.assign(series.begin(), series.end());
  std::sort(summary.series.begin(), summary.series.end(),
            [](const WindowMetrics& a, const WindowMetrics& b) { return a.window_index < b.window_index; });

  std::vector<std::int64_t> latencies;
  latencies.reserve(series.size());
  std::uint64_t window_loss_count = 0;
  double window_loss_sum = 0.0;
  for (const WindowMetrics& m : summary.series) {
    latencies.push_back(m.latency.count());
    summary.received_events += m.received_events;
    summary.received_bytes += m.received_bytes;
    if (m.source_events) {
      window_loss_sum += loss_rate(*m.source_events, std::min(m.received_events, *m.source_events));
      ++window_loss_count;
    }
  }
  std::sort(latencies.begin(), latencies.end());
  const std::size_t n = latencies.size();
  const double median_us = n % 2 == 1 ? static_cast<double>(latencies[n / 2])
                                      : (static_cast<double>(latencies[n / 2 - 1]) + latencies[n / 2]) / 2.0;
  // Integer sum keeps the mean independent of recording order.
  const auto sum_us = std::accumulate(latencies.begin(), latencies.end(), std::int64_t{0});

  summary.windows = n;
  summary.max_latency_ms = static_cast<double>(latencies.back()) / 1000.0;
  summary.median_latency_ms = median_us / 1000.0;
  summary.mean_latency_ms = static_cast<double>(sum_us) / static_cast<double>(n) / 1000.0;
  const double seconds = std::max<double>(wall_duration.count(), 1.0) / 1e6;
  summary.mean_throughput_mbps = static_cast<double>(summary.received_bytes) * 8.0 / seconds / 1e6;
  if (source_events) {
    summary.source_events = source_events;
    summary.mean_loss = loss_rate(*source_events, summary.received_events);
  }
  if (window_loss_count > 0) summary.mean_window_loss = window_loss_sum / static_cast<double>(window_loss_count);
  return summary;
}

void write_metrics_csv(std::ostream& out, std::span<const WindowMetrics> series) {
  out << "window_index,latency_us,received_events,received_bytes,subscribed_tracks,chunk_size\n";
  char chunk[64];
  for (const WindowMetrics& m : series) {
    std::snprintf(chunk, sizeof(chunk), "%.3f", m.chunk_size);
    out << m.window_index << ',' << m.latency.count() << ',' << m.received_events << ',' << m.received_bytes << ','
        << m.subscribed_tracks << ',' << chunk << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const WindowMetrics> series) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string());
  write_metrics_csv(out, series);
}

std::vector<WindowMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("window_index,latency_us", 0) != 0) {
    fail(ErrorCategory::Data, "metrics CSV header missing");
  }
  std::vector<WindowMetrics> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    WindowMetrics m;
    std::int64_t latency = 0;
    char c1, c2, c3, c4, c5;
    if (!(row >> m.window_index >> c1 >> latency >> c2 >> m.received_events >> c3 >> m.received_bytes >> c4 >>
          m.subscribed_tracks >> c5 >> m.chunk_size) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',') {
      fail(ErrorCategory::Data, "malformed metrics row: " + line);
    }
    m.latency = Micros{latency};
    series.push_back(m);
  }
  return series;
}

std::vector<WindowMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  return read_metrics_csv(in);
}

}  // namespace evs
