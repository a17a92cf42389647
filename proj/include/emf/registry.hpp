#pragma once

// Device profile persistence: one JSON document per class label in a flat
// directory. Floating-point fields are stored as shortest round-tripping
// decimal strings so a reloaded model scores bit-identically.
//
// Document schema (format_version 1):
//   {format_version, class_label, created_at (ISO-8601 UTC),
//    layout{window_ms, band_start_hz, band_stop_hz, time_splits, freq_splits},
//    instrument{name, start_hz, stop_hz, rbw_hz, sweep_points?, sweep_time_ms?},
//    standardizer{mean[], std[]},
//    svm{gamma, nu, rho, alphas[], support_vectors[[]]},
//    training_trace_ids[]}

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emf/features.hpp"
#include "emf/numio.hpp"
#include "emf/ocsvm.hpp"
#include "emf/trace.hpp"

namespace emf {

inline constexpr int kProfileFormatVersion = 1;

struct DeviceProfile {
  std::string class_label;
  OneClassModel model;
  RegionLayout layout;
  InstrumentFormat instrument;
  std::string created_at;  // ISO-8601 UTC
  std::vector<std::string> training_trace_ids;
  int format_version = kProfileFormatVersion;
};

struct DuplicateLabel : std::runtime_error {
  explicit DuplicateLabel(const std::string& label)
      : std::runtime_error("profile for label '" + label + "' already exists (pass replace to overwrite)") {}
};

struct IoFailure : std::runtime_error {
  explicit IoFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct CorruptProfile : std::runtime_error {
  std::string file;
  CorruptProfile(const std::filesystem::path& p, const std::string& why)
      : std::runtime_error("corrupt profile " + p.string() + ": " + why), file(p.string()) {}
};

struct UnsupportedFormatVersion : std::runtime_error {
  std::string file;
  UnsupportedFormatVersion(const std::filesystem::path& p, int version)
      : std::runtime_error("profile " + p.string() + " has format_version " + std::to_string(version) +
                           ", newest supported is " + std::to_string(kProfileFormatVersion)),
        file(p.string()) {}
};

inline std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline bool safe_label(const std::string& label) {
  if (label.empty() || label.front() == '.') return false;
  for (char ch : label) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '_' || ch == '-' || ch == '.';
    if (!ok) return false;
  }
  return true;
}

inline nlohmann::json doubles_to_json(const std::vector<double>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (double x : v) arr.push_back(fmt_double(x));
  return arr;
}

inline double json_to_double(const nlohmann::json& j, const std::filesystem::path& file) {
  double out = 0.0;
  if (!j.is_string() || !parse_double(j.get_ref<const std::string&>(), out))
    throw CorruptProfile(file, "expected a decimal-string number");
  return out;
}

inline std::vector<double> json_to_doubles(const nlohmann::json& j, const std::filesystem::path& file) {
  if (!j.is_array()) throw CorruptProfile(file, "expected an array of decimal strings");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(json_to_double(e, file));
  return out;
}

}  // namespace detail

inline nlohmann::json profile_to_json(const DeviceProfile& p) {
  nlohmann::json j;
  j["format_version"] = p.format_version;
  j["class_label"] = p.class_label;
  j["created_at"] = p.created_at;
  j["layout"] = {{"window_ms", fmt_double(p.layout.window_ms)},
                 {"band_start_hz", fmt_double(p.layout.band_start_hz)},
                 {"band_stop_hz", fmt_double(p.layout.band_stop_hz)},
                 {"time_splits", p.layout.time_splits},
                 {"freq_splits", p.layout.freq_splits}};
  nlohmann::json inst = {{"name", p.instrument.name},
                         {"start_hz", fmt_double(p.instrument.start_hz)},
                         {"stop_hz", fmt_double(p.instrument.stop_hz)},
                         {"rbw_hz", fmt_double(p.instrument.rbw_hz)}};
  if (p.instrument.sweep_points) inst["sweep_points"] = *p.instrument.sweep_points;
  if (p.instrument.sweep_time_ms) inst["sweep_time_ms"] = fmt_double(*p.instrument.sweep_time_ms);
  j["instrument"] = inst;
  j["standardizer"] = {{"mean", detail::doubles_to_json(p.model.standardizer.mean)},
                       {"std", detail::doubles_to_json(p.model.standardizer.std_dev)}};
  nlohmann::json svs = nlohmann::json::array();
  for (const auto& sv : p.model.support_vectors) svs.push_back(detail::doubles_to_json(sv));
  j["svm"] = {{"gamma", fmt_double(p.model.gamma)},
              {"nu", fmt_double(p.model.nu)},
              {"rho", fmt_double(p.model.rho)},
              {"alphas", detail::doubles_to_json(p.model.alphas)},
              {"support_vectors", svs}};
  j["training_trace_ids"] = p.training_trace_ids;
  return j;
}

inline DeviceProfile profile_from_json(const nlohmann::json& j, const std::filesystem::path& file) {
  try {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
      throw CorruptProfile(file, "missing format_version");
    const int version = j["format_version"].get<int>();
    if (version > kProfileFormatVersion) throw UnsupportedFormatVersion(file, version);
    if (version < 1) throw CorruptProfile(file, "format_version below 1");

    DeviceProfile p;
    p.format_version = version;
    p.class_label = j.at("class_label").get<std::string>();
    p.created_at = j.at("created_at").get<std::string>();

    const auto& layout = j.at("layout");
    p.layout.window_ms = detail::json_to_double(layout.at("window_ms"), file);
    p.layout.band_start_hz = detail::json_to_double(layout.at("band_start_hz"), file);
    p.layout.band_stop_hz = detail::json_to_double(layout.at("band_stop_hz"), file);
    p.layout.time_splits = layout.at("time_splits").get<std::uint32_t>();
    p.layout.freq_splits = layout.at("freq_splits").get<std::uint32_t>();

    const auto& inst = j.at("instrument");
    p.instrument.name = inst.at("name").get<std::string>();
    p.instrument.start_hz = detail::json_to_double(inst.at("start_hz"), file);
    p.instrument.stop_hz = detail::json_to_double(inst.at("stop_hz"), file);
    p.instrument.rbw_hz = detail::json_to_double(inst.at("rbw_hz"), file);
    if (inst.contains("sweep_points")) p.instrument.sweep_points = inst["sweep_points"].get<std::uint32_t>();
    if (inst.contains("sweep_time_ms")) p.instrument.sweep_time_ms = detail::json_to_double(inst["sweep_time_ms"], file);

    const auto& st = j.at("standardizer");
    p.model.standardizer.mean = detail::json_to_doubles(st.at("mean"), file);
    p.model.standardizer.std_dev = detail::json_to_doubles(st.at("std"), file);

    const auto& svm = j.at("svm");
    p.model.gamma = detail::json_to_double(svm.at("gamma"), file);
    p.model.nu = detail::json_to_double(svm.at("nu"), file);
    p.model.rho = detail::json_to_double(svm.at("rho"), file);
    p.model.alphas = detail::json_to_doubles(svm.at("alphas"), file);
    for (const auto& sv : svm.at("support_vectors")) p.model.support_vectors.push_back(detail::json_to_doubles(sv, file));
    if (p.model.alphas.size() != p.model.support_vectors.size())
      throw CorruptProfile(file, "alphas and support_vectors disagree in length");
    p.model.class_label = p.class_label;

    p.training_trace_ids = j.at("training_trace_ids").get<std::vector<std::string>>();
    return p;
  } catch (const UnsupportedFormatVersion&) {
    throw;
  } catch (const CorruptProfile&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptProfile(file, e.what());
  }
}

inline std::filesystem::path profile_path(const std::filesystem::path& dir, const std::string& label) {
  return dir / (label + ".json");
}

inline std::string store_profile(const std::filesystem::path& dir, const DeviceProfile& profile,
                                 bool replace = false) {
  if (!detail::safe_label(profile.class_label))
    throw IoFailure("label '" + profile.class_label + "' is not filesystem-safe ([A-Za-z0-9._-], no leading dot)");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create registry directory " + dir.string() + ": " + ec.message());
  const auto path = profile_path(dir, profile.class_label);
  if (!replace && std::filesystem::exists(path)) throw DuplicateLabel(profile.class_label);
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << profile_to_json(profile).dump(2) << '\n';
  out.flush();
  if (!out) throw IoFailure("write to " + path.string() + " failed");
  return profile.class_label;
}

inline DeviceProfile load_profile(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoFailure("cannot open " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptProfile(file, e.what());
  }
  DeviceProfile p = profile_from_json(j, file);
  if (file.stem().string() != p.class_label)
    throw CorruptProfile(file, "file name does not match class_label '" + p.class_label + "'");
  return p;
}

inline std::vector<DeviceProfile> load_all(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) throw IoFailure("registry directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<DeviceProfile> profiles;
  profiles.reserve(files.size());
  for (const auto& f : files) profiles.push_back(load_profile(f));
  return profiles;
}

inline std::vector<std::string> list_profiles(const std::filesystem::path& dir) {
  std::vector<std::string> labels;
  for (const auto& p : load_all(dir)) labels.push_back(p.class_label);
  return labels;  // load_all sorts by file name == label
}

}  // namespace emf
