#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "evstream/error.hpp"
#include "evstream/event_io.hpp"
#include "evstream/harness.hpp"
#include "evstream/partition.hpp"
#include "evstream/reduction.hpp"
#include "evstream/sink.hpp"

namespace py = pybind11;
using namespace evs;

namespace {

using EventArray = py::array_t<Event, py::array::c_style | py::array::forcecast>;

std::vector<Event> to_events(const EventArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d event array");
  return {a.data(), a.data() + a.size()};
}

EventArray to_array(const std::vector<Event>& events) {
  EventArray out(static_cast<py::ssize_t>(events.size()));
  std::copy(events.begin(), events.end(), out.mutable_data());
  return out;
}

Micros ms(double v) { return Micros{static_cast<std::int64_t>(std::llround(v * 1000.0))}; }

EventWindow as_window(const EventArray& a, std::uint64_t start_t) { return {0, start_t, to_events(a)}; }

py::dict simulate(const py::kwargs& kw) {
  ExperimentConfig c;
  for (const auto& [key, value] : kw) {
    const auto k = key.cast<std::string>();
    if (k == "profile") c.profile = RateProfile::parse(value.cast<std::string>());
    else if (k == "input") c.input = value.cast<std::filesystem::path>();
    else if (k == "duration") c.duration_s = value.cast<double>();
    else if (k == "strategy") c.strategy = parse_strategy(value.cast<std::string>());
    else if (k == "tracks") c.tracks = value.cast<std::uint16_t>();
    else if (k == "events_per_track") c.events_per_track = value.cast<std::uint32_t>();
    else if (k == "bandwidth") c.bandwidth_mbps = value.cast<double>();
    else if (k == "burst") c.burst_ms = value.cast<double>();
    else if (k == "latency_target") c.latency_target_ms = value.cast<double>();
    else if (k == "queue_cap") c.queue_capacity = value.cast<std::size_t>();
    else if (k == "link_delay") c.link_delay = ms(value.cast<double>());
    else if (k == "passive") c.passive_receiver = value.cast<bool>();
    else if (k == "seed") c.seed = value.cast<std::uint64_t>();
    else throw py::type_error("simulate() got an unexpected keyword argument '" + k + "'");
  }
  c.validate();

  ExperimentResult r;
  {
    py::gil_scoped_release release;
    r = run_experiment(c);
  }
  py::dict out;
  out["summary"] = summary_json(r).dump();
  py::list rows;
  for (const WindowMetrics& m : r.receiver.series) {
    py::dict row;
    row["window_index"] = m.window_index;
    row["latency_us"] = m.latency.count();
    row["received_events"] = m.received_events;
    row["subscribed_tracks"] = m.subscribed_tracks;
    row["chunk_size"] = m.chunk_size;
    rows.append(row);
  }
  out["metrics"] = rows;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event windows, reduction, track partitioning and the streaming simulator";

  PYBIND11_NUMPY_DTYPE(Event, t, x, y, p);

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&] { return py::exception<Error>(m, "EvstreamError", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error.get_stored(), (std::string(to_string(e.category())) + ": " + e.what()).c_str());
    }
  });

  m.def("event_dtype", [] { return py::dtype::of<Event>(); });

  m.def("track_rate", [](std::uint32_t e, double window_ms) { return track_rate(e, ms(window_ms)); },
        py::arg("events_per_track"), py::arg("window_ms") = 50.0, "Bits per second carried by one full track.");
  m.def("budget_events", [](double mbps, double window_ms) { return budget_events(mbps, ms(window_ms)); },
        py::arg("bandwidth_mbps"), py::arg("window_ms") = 50.0);

  m.def("read_evst", [](const std::filesystem::path& path) {
    Recording rec = read_evst(path);
    return py::make_tuple(to_array(rec.events), py::make_tuple(rec.geometry.width, rec.geometry.height));
  });
  m.def("write_evst",
        [](const std::filesystem::path& path, const EventArray& events, std::uint16_t width, std::uint16_t height) {
          write_evst(path, Recording{SensorGeometry{width, height}, to_events(events)});
        },
        py::arg("path"), py::arg("events"), py::arg("width") = 1280, py::arg("height") = 720);

  m.def("generate", [](const std::vector<std::uint64_t>& counts, std::uint64_t seed, std::uint16_t width,
                       std::uint16_t height) { return to_array(generate_synthetic({width, height}, counts, seed)); },
        py::arg("counts"), py::arg("seed") = 1, py::arg("width") = 1280, py::arg("height") = 720,
        "Synthetic stream with counts[i] events in window i.");

  m.def("window_split", [](const EventArray& events, double window_ms) {
    py::list out;
    for (const EventWindow& w : window_split(to_events(events), ms(window_ms))) out.append(to_array(w.events));
    return out;
  }, py::arg("events"), py::arg("window_ms") = 50.0);

  m.def("truncate_tail", [](const EventArray& w, std::uint64_t budget) {
    return to_array(truncate_tail(as_window(w, 0), budget).events);
  });
  m.def("sample_even", [](const EventArray& w, std::uint64_t budget, std::uint64_t start_t, double window_ms) {
    EvenSamplingOptions options;
    options.window_length = ms(window_ms);
    return to_array(sample_even(as_window(w, start_t), budget, options).events);
  }, py::arg("window"), py::arg("budget"), py::arg("start_t") = 0, py::arg("window_ms") = 50.0);

  m.def("partition_bucket", [](const EventArray& w, std::uint16_t n, std::uint32_t e) {
    const Partitioned parts = partition_bucket(as_window(w, 0), n, e);
    py::list tracks;
    for (const TrackSegment& s : parts.segments) tracks.append(to_array(s.events));
    return py::make_tuple(tracks, parts.dropped);
  }, py::arg("window"), py::arg("tracks"), py::arg("events_per_track"));
  m.def("partition_round_robin", [](const EventArray& w, std::uint16_t n) {
    py::list tracks;
    for (const TrackSegment& s : partition_round_robin(as_window(w, 0), n).segments) tracks.append(to_array(s.events));
    return tracks;
  });
  m.def("reconstruct_bucket", [](const std::vector<EventArray>& tracks) {
    std::vector<TrackSegment> segments;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      segments.push_back({static_cast<TrackId>(i), 0, Micros{0}, to_events(tracks[i])});
    }
    return to_array(reconstruct_bucket(segments, static_cast<std::uint16_t>(segments.size())).events);
  }, "Concatenates tracks 0..k-1.");

  m.def("build_tensor", [](const EventArray& w, std::uint16_t width, std::uint16_t height, std::uint64_t start_t,
                           double window_ms, std::uint32_t sub_bins) {
    const EventTensor t = build_tensor(as_window(w, start_t), {width, height}, ms(window_ms), sub_bins);
    py::array_t<std::uint32_t> out({t.channels(), std::size_t{height}, std::size_t{width}});
    std::copy(t.cells.begin(), t.cells.end(), out.mutable_data());
    return out;
  }, py::arg("window"), py::arg("width"), py::arg("height"), py::arg("start_t") = 0, py::arg("window_ms") = 50.0,
     py::arg("sub_bins") = kTensorSubBins, "(2T, H, W) per-polarity, per-sub-bin event counts.");

  m.def("simulate", &simulate, "Deterministic simulated run; keywords mirror the CLI's simulate flags.");
}
