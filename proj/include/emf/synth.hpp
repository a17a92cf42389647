#pragma once

// Synthetic spectral-trace corpora: seeded device archetypes with a
// boot-segment/idle structure, per-band gaussian variation, additive
// noise and a randomized connection delay (jitter). These corpora stand
// in for hardware recordings in tests and end-to-end evaluations.
//
// Determinism contract: every trace is generated from its own splitmix64
// substream, derived as
//   trace_seed  = derive_seed(derive_seed(corpus_seed, archetype_index), trace_index)
//   jitter_seed = derive_seed(trace_seed, 1)   (one uniform draw)
//   signal_seed = derive_seed(trace_seed, 2)
// and within a trace the draws run sweep-major, frequency-ascending:
// one gaussian per idle sample, two per boot-segment sample (segment
// deviation first, noise second).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emf/numio.hpp"
#include "emf/prng.hpp"
#include "emf/trace.hpp"

namespace emf {

struct BootSegment {
  double duration_ms = 0.0;
  std::vector<double> band_means_dbm;
  std::vector<double> band_stds_dbm;
};

struct DeviceArchetype {
  std::string id;
  std::vector<BootSegment> segments;
  std::vector<bool> active_bands;  // bands the device actually radiates in
  double idle_floor_dbm = -87.0;
  double band_start_hz = 0.0;
  double band_stop_hz = 0.0;
  std::uint32_t band_count = 1;
  std::uint64_t seed = 0;  // seed the archetype was drawn from

  double boot_duration_ms() const {
    double total = 0.0;
    for (const auto& s : segments) total += s.duration_ms;
    return total;
  }
};

inline constexpr double kIdleFloorDbm = -87.0;
inline constexpr double kBandActivityRate = 0.25;

// Emissions concentrate in a device-specific subset of bands, the way
// oscillator harmonics do; the silent bands rest at the idle floor. Draw
// order: activity mask (redrawn until two bands radiate), then per
// segment: duration, band means, band stds. Active-band means span
// [-80, -30] dBm, stds [0.5, 3] dBm.
inline DeviceArchetype make_archetype(std::uint64_t seed, double band_start_hz, double band_stop_hz,
                                      std::uint32_t band_count, std::uint32_t segment_count) {
  if (segment_count < 1) throw std::invalid_argument("make_archetype: need at least one segment");
  if (band_count < 1) throw std::invalid_argument("make_archetype: need at least one band");
  if (!(band_start_hz < band_stop_hz)) throw std::invalid_argument("make_archetype: bad band");

  SplitMix64 rng(seed);
  DeviceArchetype a;
  a.seed = seed;
  a.band_start_hz = band_start_hz;
  a.band_stop_hz = band_stop_hz;
  a.band_count = band_count;
  a.idle_floor_dbm = kIdleFloorDbm;

  a.active_bands.resize(band_count);
  std::size_t active = 0;
  while (active < std::min<std::size_t>(2, band_count)) {
    active = 0;
    for (std::uint32_t b = 0; b < band_count; ++b) {
      a.active_bands[b] = rng.next_double() < kBandActivityRate;
      active += a.active_bands[b];
    }
  }

  a.segments.resize(segment_count);
  for (auto& seg : a.segments) {
    seg.duration_ms = rng.uniform(120.0, 400.0);
    seg.band_means_dbm.resize(band_count);
    seg.band_stds_dbm.resize(band_count);
    for (std::uint32_t b = 0; b < band_count; ++b)
      seg.band_means_dbm[b] = a.active_bands[b] ? rng.uniform(-80.0, -30.0) : a.idle_floor_dbm;
    for (auto& s : seg.band_stds_dbm) s = rng.uniform(0.5, 3.0);
  }
  return a;
}

// Same-family variant of a base archetype: active-band means get a
// gaussian shift and segment durations a relative stretch. With
// keep_first_segment the power-up segment stays shared, which models a
// firmware change that only touches the payload after power-up.
inline DeviceArchetype perturb_archetype(const DeviceArchetype& base, std::uint64_t seed, double mean_shift_dbm,
                                         double duration_stretch, bool keep_first_segment) {
  SplitMix64 rng(seed);
  DeviceArchetype a = base;
  a.seed = seed;
  for (std::size_t s = keep_first_segment ? 1 : 0; s < a.segments.size(); ++s) {
    auto& seg = a.segments[s];
    seg.duration_ms *= 1.0 + rng.uniform(-duration_stretch, duration_stretch);
    for (std::uint32_t b = 0; b < a.band_count; ++b)
      if (a.active_bands[b]) seg.band_means_dbm[b] += mean_shift_dbm * rng.gaussian();
  }
  return a;
}

struct DurationTooShort : std::runtime_error {
  DurationTooShort(double duration_ms, double boot_ms)
      : std::runtime_error("trace duration " + fmt_double(duration_ms) + " ms is shorter than the boot sequence (" +
                           fmt_double(boot_ms) + " ms)") {}
};

namespace detail {

inline std::vector<double> sweep_frequencies(const InstrumentFormat& inst) {
  inst.validate();
  std::vector<double> freqs;
  if (inst.sweep_points && *inst.sweep_points >= 2) {
    const auto points = *inst.sweep_points;
    const double span = inst.stop_hz - inst.start_hz;
    freqs.reserve(points);
    for (std::uint32_t k = 0; k < points; ++k)
      freqs.push_back(inst.start_hz + span * k / (points - 1));
  } else {
    // bin centers at the resolution bandwidth
    for (double f = inst.start_hz + inst.rbw_hz / 2.0; f < inst.stop_hz; f += inst.rbw_hz) freqs.push_back(f);
  }
  if (freqs.empty()) throw std::invalid_argument("instrument grid produced no frequencies");
  return freqs;
}

inline double sweep_interval_ms(const InstrumentFormat& inst) {
  return inst.sweep_time_ms.value_or(10.0);
}

}  // namespace detail

// Emits floor(duration / sweep_interval) complete sweeps, each stamped at
// its start time. The boot sequence begins after jitter_ms of idle floor
// and returns to the idle floor when the segments run out.
inline SpectralTrace synthesize_trace(const DeviceArchetype& archetype, const InstrumentFormat& instrument,
                                      double duration_ms, double jitter_ms, double noise_std_dbm,
                                      std::uint64_t seed) {
  const double boot_ms = archetype.boot_duration_ms();
  if (duration_ms < boot_ms) throw DurationTooShort(duration_ms, boot_ms);
  if (jitter_ms < 0.0) throw std::invalid_argument("synthesize_trace: negative jitter");

  const auto freqs = detail::sweep_frequencies(instrument);
  const double dt = detail::sweep_interval_ms(instrument);
  const auto sweeps = static_cast<std::size_t>(duration_ms / dt);
  const double band_width = (archetype.band_stop_hz - archetype.band_start_hz) / archetype.band_count;

  SplitMix64 rng(seed);
  SpectralTrace trace;
  trace.format = instrument;
  trace.samples.reserve(sweeps * freqs.size());
  for (std::size_t k = 0; k < sweeps; ++k) {
    const double t = static_cast<double>(k) * dt;
    // which boot segment is active at t (if any)
    const BootSegment* active = nullptr;
    double rel = t - jitter_ms;
    if (rel >= 0.0) {
      for (const auto& seg : archetype.segments) {
        if (rel < seg.duration_ms) {
          active = &seg;
          break;
        }
        rel -= seg.duration_ms;
      }
    }
    for (double f : freqs) {
      double power;
      if (active) {
        auto band = static_cast<std::size_t>((f - archetype.band_start_hz) / band_width);
        if (band >= archetype.band_count) band = archetype.band_count - 1;
        power = active->band_means_dbm[band] + active->band_stds_dbm[band] * rng.gaussian() +
                noise_std_dbm * rng.gaussian();
      } else {
        power = archetype.idle_floor_dbm + noise_std_dbm * rng.gaussian();
      }
      trace.samples.push_back({t, f, power});
    }
  }
  return trace;
}

struct JitterRange {
  double lo_ms = 0.0;
  double hi_ms = 0.0;
};

struct CorpusSpec {
  std::vector<DeviceArchetype> archetypes;
  std::uint32_t traces_per_class = 10;
  JitterRange jitter;
  double noise_std_dbm = 1.0;
  std::uint64_t seed = 1;
  InstrumentFormat instrument;
  double duration_ms = 2000.0;

  void validate() const {
    if (archetypes.empty()) throw std::invalid_argument("CorpusSpec: no archetypes");
    if (traces_per_class < 1) throw std::invalid_argument("CorpusSpec: traces_per_class must be >= 1");
    if (jitter.lo_ms < 0.0 || jitter.hi_ms < jitter.lo_ms) throw std::invalid_argument("CorpusSpec: bad jitter range");
    instrument.validate();
  }
};

struct SynthesizedTrace {
  SpectralTrace trace;
  std::uint64_t trace_seed = 0;
  std::uint64_t archetype_seed = 0;
};

inline std::vector<SynthesizedTrace> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<SynthesizedTrace> out;
  out.reserve(static_cast<std::size_t>(spec.archetypes.size()) * spec.traces_per_class);
  for (std::size_t a = 0; a < spec.archetypes.size(); ++a) {
    const auto& archetype = spec.archetypes[a];
    const std::uint64_t class_seed = derive_seed(spec.seed, a);
    for (std::uint32_t j = 0; j < spec.traces_per_class; ++j) {
      const std::uint64_t trace_seed = derive_seed(class_seed, j);
      SplitMix64 jitter_rng(derive_seed(trace_seed, 1));
      const double jitter = jitter_rng.uniform(spec.jitter.lo_ms, spec.jitter.hi_ms);
      SpectralTrace trace = synthesize_trace(archetype, spec.instrument, spec.duration_ms, jitter,
                                             spec.noise_std_dbm, derive_seed(trace_seed, 2));
      trace.label = archetype.id;
      char name[32];
      std::snprintf(name, sizeof(name), "trace_%02u", j);
      trace.source_id = archetype.id + "/" + name;
      out.push_back({std::move(trace), trace_seed, archetype.seed});
    }
  }
  return out;
}

// ---- canned corpus geometries ------------------------------------------

// Narrow-band recorder: 10 MHz span as a 64-point grid, one sweep every
// 10 ms. Desk-scale stand-in for an SDR streaming FFT rows.
inline InstrumentFormat sim_sdr_format() {
  InstrumentFormat f;
  f.name = "sim-sdr";
  f.start_hz = 0.0;
  f.stop_hz = 10e6;
  f.sweep_points = 64;
  f.rbw_hz = 10e6 / 63.0;
  f.sweep_time_ms = 10.0;
  return f;
}

// Wide-band sweeper: 200 MHz span, 61 points, 4.01 ms per sweep.
inline InstrumentFormat sim_specan_format() {
  InstrumentFormat f;
  f.name = "sim-specan";
  f.start_hz = 0.0;
  f.stop_hz = 200e6;
  f.sweep_points = 61;
  f.rbw_hz = 200e6 / 60.0;
  f.sweep_time_ms = 4.01;
  return f;
}

// 17 independent device classes, 10 traces each, on the narrow-band grid.
inline CorpusSpec scenario1_spec(std::uint64_t seed, std::uint32_t classes = 17, std::uint32_t traces_per_class = 10) {
  CorpusSpec spec;
  spec.instrument = sim_sdr_format();
  spec.duration_ms = 2000.0;
  spec.jitter = {250.0, 550.0};
  spec.noise_std_dbm = 1.0;
  spec.seed = seed;
  spec.traces_per_class = traces_per_class;
  for (std::uint32_t i = 0; i < classes; ++i) {
    auto a = make_archetype(derive_seed(seed, 1000 + i), spec.instrument.start_hz, spec.instrument.stop_hz, 24, 4);
    char id[16];
    std::snprintf(id, sizeof(id), "dev%02u", i + 1);
    a.id = id;
    spec.archetypes.push_back(std::move(a));
  }
  return spec;
}

// Same-model units: one base archetype, every unit a small perturbation of
// it, recorded on the wide-band sweeper with a 3.35 s usable window.
inline CorpusSpec scenario2_spec(std::uint64_t seed, std::uint32_t units = 15, std::uint32_t traces_per_class = 10) {
  CorpusSpec spec;
  spec.instrument = sim_specan_format();
  spec.duration_ms = 4200.0;
  spec.jitter = {250.0, 550.0};
  spec.noise_std_dbm = 0.7;
  spec.seed = seed;
  spec.traces_per_class = traces_per_class;
  const auto base = make_archetype(derive_seed(seed, 2000), spec.instrument.start_hz, spec.instrument.stop_hz, 24, 9);
  for (std::uint32_t i = 0; i < units; ++i) {
    auto a = perturb_archetype(base, derive_seed(seed, 2100 + i), 2.0, 0.08, false);
    char id[16];
    std::snprintf(id, sizeof(id), "unit%02u", i + 1);
    a.id = id;
    spec.archetypes.push_back(std::move(a));
  }
  return spec;
}

// One base device plus six firmware variants that share the power-up
// segment and differ only afterwards.
inline CorpusSpec firmware_spec(std::uint64_t seed, std::uint32_t variants = 6, std::uint32_t traces_per_class = 10) {
  CorpusSpec spec;
  spec.instrument = sim_sdr_format();
  spec.duration_ms = 2600.0;
  spec.jitter = {250.0, 550.0};
  spec.noise_std_dbm = 1.0;
  spec.seed = seed;
  spec.traces_per_class = traces_per_class;
  auto base = make_archetype(derive_seed(seed, 3000), spec.instrument.start_hz, spec.instrument.stop_hz, 24, 5);
  base.id = "fw1";
  spec.archetypes.push_back(base);
  for (std::uint32_t i = 0; i < variants; ++i) {
    auto a = perturb_archetype(base, derive_seed(seed, 3100 + i), 1.2, 0.15, true);
    char id[16];
    std::snprintf(id, sizeof(id), "fw%u", i + 2);
    a.id = id;
    spec.archetypes.push_back(std::move(a));
  }
  return spec;
}

// ---- corpus directory layout --------------------------------------------
//
// One subdirectory per class with the trace CSV files, plus manifest.csv
// (file,label,seed,archetype_seed) in generation order.

struct ManifestEntry {
  std::string file;
  std::string label;
  std::uint64_t seed = 0;
  std::uint64_t archetype_seed = 0;
};

inline void write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir) {
  const auto corpus = generate_corpus(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create corpus directory " + dir.string() + ": " + ec.message());

  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "file,label,seed,archetype_seed\n";
  for (const auto& entry : corpus) {
    const std::string rel = entry.trace.source_id + ".csv";
    const auto path = dir / rel;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create class directory: " + ec.message());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace " + path.string());
    serialize_trace(entry.trace, out);
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
    manifest << rel << ',' << *entry.trace.label << ',' << fmt_u64(entry.trace_seed) << ','
             << fmt_u64(entry.archetype_seed) << '\n';
  }
  if (!manifest) throw std::runtime_error("manifest write failed in " + dir.string());
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw std::runtime_error("no manifest.csv in " + dir.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || (line_no == 1 && sv.substr(0, 5) == "file,")) continue;
    auto fields = split_csv_line(sv);
    if (fields.size() != 4) throw std::runtime_error("manifest line " + std::to_string(line_no) + " malformed");
    ManifestEntry e;
    e.file = std::string(trim(fields[0]));
    e.label = std::string(trim(fields[1]));
    if (!parse_u64(trim(fields[2]), e.seed) || !parse_u64(trim(fields[3]), e.archetype_seed))
      throw std::runtime_error("manifest line " + std::to_string(line_no) + " has bad seeds");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<SpectralTrace> load_corpus(const std::filesystem::path& dir) {
  std::vector<SpectralTrace> traces;
  for (const auto& entry : read_manifest(dir)) {
    std::ifstream in(dir / entry.file);
    if (!in) throw std::runtime_error("missing corpus trace " + entry.file);
    std::string source = entry.file;
    if (source.size() > 4 && source.compare(source.size() - 4, 4, ".csv") == 0) source.resize(source.size() - 4);
    SpectralTrace t = parse_trace(in, source);
    t.label = entry.label;
    traces.push_back(std::move(t));
  }
  return traces;
}

}  // namespace emf
