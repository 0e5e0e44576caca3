#include "evstream/event_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "evstream/error.hpp"

namespace evs {

namespace {

void put_u16(std::uint8_t* out, std::uint16_t v) {
  out[0] = static_cast<std::uint8_t>(v);
  out[1] = static_cast<std::uint8_t>(v >> 8);
}

std::uint16_t get_u16(const std::uint8_t* in) {
  return static_cast<std::uint16_t>(in[0] | (in[1] << 8));
}

void put_u64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    fail(ErrorCategory::Data, "line " + std::to_string(line_no) + ": bad field '" + std::string(field) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void write_evst(std::ostream& out, const Recording& recording) {
  std::uint8_t header[kEvstHeaderSize];
  std::memcpy(header, kEvstMagic, 4);
  put_u16(header + 4, kEvstVersion);
  put_u16(header + 6, recording.geometry.width);
  put_u16(header + 8, recording.geometry.height);
  put_u64(header + 10, recording.events.size());
  out.write(reinterpret_cast<const char*>(header), sizeof(header));

  std::vector<std::uint8_t> body;
  encode_events(recording.events, body);
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) fail(ErrorCategory::Io, "failed writing .evst stream");
}

void write_evst(const std::filesystem::path& path, const Recording& recording) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::Io, "cannot open " + path.string() + " for writing");
  write_evst(out, recording);
}

Recording read_evst(std::istream& in) {
  std::uint8_t header[kEvstHeaderSize];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    fail(ErrorCategory::Data, ".evst header truncated");
  }
  if (std::memcmp(header, kEvstMagic, 4) != 0) fail(ErrorCategory::Data, "bad .evst magic");
  const std::uint16_t version = get_u16(header + 4);
  if (version != kEvstVersion) {
    fail(ErrorCategory::Data, "unsupported .evst version " + std::to_string(version));
  }

  Recording recording;
  recording.geometry = {get_u16(header + 6), get_u16(header + 8)};
  const std::uint64_t count = get_u64(header + 10);

  std::vector<std::uint8_t> body(count * kEventRecordSize);
  if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()))) {
    fail(ErrorCategory::Data, ".evst body shorter than header event_count " + std::to_string(count));
  }
  recording.events = decode_events(body);
  for (const Event& e : recording.events) {
    if (!recording.geometry.contains(e)) fail(ErrorCategory::Data, ".evst event outside sensor geometry");
  }
  return recording;
}

Recording read_evst(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  return read_evst(in);
}

std::vector<Event> read_event_text(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;

    std::string_view fields[4];
    std::string_view rest = view;
    for (int i = 0; i < 4; ++i) {
      const auto comma = rest.find(',');
      if ((i < 3) == (comma == std::string_view::npos)) {
        fail(ErrorCategory::Data, "line " + std::to_string(line_no) + ": expected t,x,y,p");
      }
      fields[i] = trim(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }

    Event e;
    e.t = parse_field<std::uint64_t>(fields[0], line_no);
    e.x = parse_field<std::uint16_t>(fields[1], line_no);
    e.y = parse_field<std::uint16_t>(fields[2], line_no);
    const auto p = parse_field<unsigned>(fields[3], line_no);
    if (p > 1) fail(ErrorCategory::Data, "line " + std::to_string(line_no) + ": polarity must be 0 or 1");
    e.p = static_cast<std::uint8_t>(p);
    if (!events.empty() && e.t < events.back().t) {
      fail(ErrorCategory::Ordering, "line " + std::to_string(line_no) + ": timestamps must be sorted");
    }
    events.push_back(e);
  }
  return events;
}

std::vector<Event> read_event_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::Io, "cannot open " + path.string());
  return read_event_text(in);
}

void write_event_text(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<unsigned>(e.p) << '\n';
  }
}

}  // namespace evs
