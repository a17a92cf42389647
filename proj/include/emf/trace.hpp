#pragma once

// Spectral trace data model: the (timestamp, frequency, power) sample
// streams that instruments emit, plus parsing, serialization, boot-onset
// detection and windowing.
//
// Trace file format: UTF-8 text, LF newlines, one record per line as
// `timestamp_ms,frequency_hz,power_dbm` ('.' decimal separator), with
// optional leading comment lines `# key=value` carrying instrument
// metadata (keys: instrument, start_hz, stop_hz, rbw_hz).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emf/numio.hpp"

namespace emf {

struct SpectralSample {
  double timestamp_ms = 0.0;
  double frequency_hz = 0.0;
  double power_dbm = 0.0;

  friend bool operator==(const SpectralSample&, const SpectralSample&) = default;
};

struct InstrumentFormat {
  std::string name;
  double start_hz = 0.0;
  double stop_hz = 0.0;
  double rbw_hz = 0.0;
  std::optional<std::uint32_t> sweep_points;
  std::optional<double> sweep_time_ms;

  friend bool operator==(const InstrumentFormat&, const InstrumentFormat&) = default;

  void validate() const {
    if (!(start_hz < stop_hz)) throw std::invalid_argument("InstrumentFormat: start_frequency must be below stop_frequency");
    if (!(rbw_hz > 0.0)) throw std::invalid_argument("InstrumentFormat: resolution_bandwidth must be positive");
  }

  bool in_band(double frequency_hz) const {
    return frequency_hz >= start_hz && frequency_hz <= stop_hz;
  }
};

struct SpectralTrace {
  std::vector<SpectralSample> samples;  // sorted by (timestamp, frequency)
  InstrumentFormat format;
  std::optional<std::string> label;
  std::string source_id;

  friend bool operator==(const SpectralTrace&, const SpectralTrace&) = default;

  double duration_ms() const {
    return samples.empty() ? 0.0 : samples.back().timestamp_ms - samples.front().timestamp_ms;
  }
};

struct MalformedRecord : std::runtime_error {
  std::size_t line;
  MalformedRecord(std::size_t line_no, const std::string& what_part)
      : std::runtime_error("malformed record at line " + std::to_string(line_no) + ": " + what_part),
        line(line_no) {}
};

struct OutOfBandFrequency : std::runtime_error {
  std::size_t line;
  double frequency_hz;
  OutOfBandFrequency(std::size_t line_no, double f, double lo, double hi)
      : std::runtime_error("frequency " + fmt_double(f) + " Hz at line " + std::to_string(line_no) +
                           " outside instrument band [" + fmt_double(lo) + ", " + fmt_double(hi) + "]"),
        line(line_no),
        frequency_hz(f) {}
};

struct EmptyTrace : std::runtime_error {
  EmptyTrace() : std::runtime_error("trace contains no samples") {}
};

struct TraceTooShort : std::runtime_error {
  explicit TraceTooShort(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyWindow : std::runtime_error {
  EmptyWindow() : std::runtime_error("window contains no samples") {}
};

namespace detail {

inline bool sample_key_less(const SpectralSample& a, const SpectralSample& b) {
  if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
  return a.frequency_hz < b.frequency_hz;
}

// "# key=value" -> (key, value); returns false for bare comments
inline bool parse_metadata_line(std::string_view line, std::string_view& key, std::string_view& value) {
  line.remove_prefix(1);  // '#'
  line = trim(line);
  std::size_t eq = line.find('=');
  if (eq == std::string_view::npos) return false;
  key = trim(line.substr(0, eq));
  value = trim(line.substr(eq + 1));
  return !key.empty();
}

struct ParsedBody {
  std::vector<SpectralSample> samples;
  InstrumentFormat header;
  bool header_has_start = false, header_has_stop = false, header_has_rbw = false;
};

inline ParsedBody parse_body(std::istream& in, const InstrumentFormat* band_check) {
  ParsedBody out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view key, value;
      if (!parse_metadata_line(line, key, value)) continue;
      if (key == "instrument") {
        out.header.name = std::string(value);
      } else if (key == "start_hz") {
        if (!parse_double(value, out.header.start_hz)) throw MalformedRecord(line_no, "bad start_hz value");
        out.header_has_start = true;
      } else if (key == "stop_hz") {
        if (!parse_double(value, out.header.stop_hz)) throw MalformedRecord(line_no, "bad stop_hz value");
        out.header_has_stop = true;
      } else if (key == "rbw_hz") {
        if (!parse_double(value, out.header.rbw_hz)) throw MalformedRecord(line_no, "bad rbw_hz value");
        out.header_has_rbw = true;
      }
      // unknown keys tolerated
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 3) throw MalformedRecord(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    SpectralSample s;
    if (!parse_double(trim(fields[0]), s.timestamp_ms)) throw MalformedRecord(line_no, "bad timestamp");
    if (!parse_double(trim(fields[1]), s.frequency_hz)) throw MalformedRecord(line_no, "bad frequency");
    if (!parse_double(trim(fields[2]), s.power_dbm)) throw MalformedRecord(line_no, "bad power");
    if (!std::isfinite(s.timestamp_ms) || !std::isfinite(s.frequency_hz) || !std::isfinite(s.power_dbm))
      throw MalformedRecord(line_no, "non-finite field");
    if (s.timestamp_ms < 0.0) throw MalformedRecord(line_no, "negative timestamp");
    if (!(s.frequency_hz > 0.0) && s.frequency_hz != 0.0) throw MalformedRecord(line_no, "negative frequency");
    if (band_check && !band_check->in_band(s.frequency_hz))
      throw OutOfBandFrequency(line_no, s.frequency_hz, band_check->start_hz, band_check->stop_hz);
    out.samples.push_back(s);
  }
  return out;
}

}  // namespace detail

// Parse with a caller-supplied instrument format; band violations reject
// the whole trace rather than dropping samples.
inline SpectralTrace parse_trace(std::istream& in, const InstrumentFormat& format, std::string source_id = {}) {
  format.validate();
  auto body = detail::parse_body(in, &format);
  if (body.samples.empty()) throw EmptyTrace();
  std::stable_sort(body.samples.begin(), body.samples.end(), detail::sample_key_less);
  SpectralTrace trace;
  trace.samples = std::move(body.samples);
  trace.format = format;
  trace.source_id = std::move(source_id);
  return trace;
}

// Self-describing variant: the instrument band comes from the '# key=value'
// header, which must carry start_hz, stop_hz and rbw_hz.
inline SpectralTrace parse_trace(std::istream& in, std::string source_id = {}) {
  auto body = detail::parse_body(in, nullptr);
  if (!(body.header_has_start && body.header_has_stop && body.header_has_rbw))
    throw MalformedRecord(0, "missing instrument metadata header (start_hz/stop_hz/rbw_hz)");
  if (body.header.name.empty()) body.header.name = "unknown";
  body.header.validate();
  for (std::size_t i = 0; i < body.samples.size(); ++i) {
    if (!body.header.in_band(body.samples[i].frequency_hz))
      throw OutOfBandFrequency(0, body.samples[i].frequency_hz, body.header.start_hz, body.header.stop_hz);
  }
  if (body.samples.empty()) throw EmptyTrace();
  std::stable_sort(body.samples.begin(), body.samples.end(), detail::sample_key_less);
  SpectralTrace trace;
  trace.samples = std::move(body.samples);
  trace.format = body.header;
  trace.source_id = std::move(source_id);
  return trace;
}

inline void serialize_trace(const SpectralTrace& trace, std::ostream& out) {
  out << "# instrument=" << trace.format.name << '\n';
  out << "# start_hz=" << fmt_double(trace.format.start_hz) << '\n';
  out << "# stop_hz=" << fmt_double(trace.format.stop_hz) << '\n';
  out << "# rbw_hz=" << fmt_double(trace.format.rbw_hz) << '\n';
  for (const auto& s : trace.samples) {
    out << fmt_double(s.timestamp_ms) << ',' << fmt_double(s.frequency_hz) << ',' << fmt_double(s.power_dbm) << '\n';
  }
}

struct OnsetParams {
  double baseline_ms = 200.0;
  double k_sigma = 5.0;
};

// Boot-onset alignment. A timeslot is one full sweep (all samples sharing
// a timestamp); the onset is the earliest slot whose total power exceeds
// baseline mean + k_sigma * baseline std, with baseline statistics taken
// over the first baseline_ms of the trace. Returns 0 when the excursion
// already happens inside the baseline, or when there is none at all.
// Zero-variance baseline: the first slot whose total differs from the
// baseline mean at all; 0 if none.
inline double detect_boot_onset(const SpectralTrace& trace, const OnsetParams& params = {}) {
  if (trace.samples.empty()) throw EmptyTrace();
  if (!(params.k_sigma > 0.0)) throw std::invalid_argument("detect_boot_onset: k_sigma must be positive");
  if (!(trace.duration_ms() > params.baseline_ms))
    throw TraceTooShort("trace duration " + fmt_double(trace.duration_ms()) + " ms does not exceed baseline " +
                        fmt_double(params.baseline_ms) + " ms");

  struct Slot {
    double t;
    double total;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < trace.samples.size();) {
    double t = trace.samples[i].timestamp_ms;
    double total = 0.0;
    while (i < trace.samples.size() && trace.samples[i].timestamp_ms == t) {
      total += trace.samples[i].power_dbm;
      ++i;
    }
    slots.push_back({t, total});
  }

  const double t0 = slots.front().t;
  std::size_t baseline_end = 0;  // first index past the baseline
  double sum = 0.0;
  while (baseline_end < slots.size() && slots[baseline_end].t < t0 + params.baseline_ms) {
    sum += slots[baseline_end].total;
    ++baseline_end;
  }
  const double mean = sum / static_cast<double>(baseline_end);
  double sq = 0.0;
  for (std::size_t i = 0; i < baseline_end; ++i) {
    double d = slots[i].total - mean;
    sq += d * d;
  }
  const double sigma = std::sqrt(sq / static_cast<double>(baseline_end));

  if (sigma == 0.0) {
    for (const auto& slot : slots) {
      if (slot.total != mean) return slot.t;
    }
    return 0.0;
  }

  const double threshold = mean + params.k_sigma * sigma;
  for (std::size_t i = 0; i < baseline_end; ++i) {
    if (slots[i].total > threshold) return 0.0;
  }
  for (std::size_t i = baseline_end; i < slots.size(); ++i) {
    if (slots[i].total > threshold) return slots[i].t;
  }
  return 0.0;
}

// Keeps samples with start <= t < start + duration, re-based to t = 0.
inline SpectralTrace window_trace(const SpectralTrace& trace, double start_ms, double duration_ms) {
  if (!(duration_ms > 0.0)) throw std::invalid_argument("window_trace: duration must be positive");
  SpectralTrace out;
  out.format = trace.format;
  out.label = trace.label;
  out.source_id = trace.source_id;
  const double end_ms = start_ms + duration_ms;
  for (const auto& s : trace.samples) {
    if (s.timestamp_ms >= start_ms && s.timestamp_ms < end_ms) {
      out.samples.push_back({s.timestamp_ms - start_ms, s.frequency_hz, s.power_dbm});
    }
  }
  if (out.samples.empty()) throw EmptyWindow();
  return out;
}

}  // namespace emf
