#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fidosim/profiles.hpp"

namespace fidosim {

namespace detail {

/// Fixed three-decimal formatting keeps CSV output byte-stable across runs.
inline std::string fmt_us(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string fmt_rate(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

/// One observations.csv line.
struct ObservationRow {
  std::string scenario_id;
  int trial = 0;
  std::string composition;  // probe class or sweep configuration
  int n = 0;
  std::string outcome;
  double elapsed_us = 0.0;
  int silent_probes = 0;
  double presence_us = 0.0;
};

struct SummaryRow {
  std::string scheme;
  int n = 0;
  int trials = 0;
  double mean_te_us = 0.0;
  double mean_td_us = 0.0;
  double error_rate = 0.0;
};

struct VerdictRecord {
  std::string profile;
  std::string scheme;
  int n = 0;
  int trials = 0;
  double error_rate = 0.0;
  bool linked = false;
  double linked_rate = 0.0;
  double margin_us = 0.0;
};

struct ExperimentReport {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::vector<ObservationRow> rows;
  std::vector<SummaryRow> summary;
  /// plotdata_<name>.dat files, two columns per point.
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  std::vector<VerdictRecord> verdicts;
  double wall_clock_ms = 0.0;  // informational; never written to output files
};

inline constexpr const char* kObservationsHeader =
    "scenario_id,trial,list_composition,n,outcome,elapsed_us,silent_probes,presence_us";
inline constexpr const char* kSummaryHeader = "scheme,n,trials,mean_te_us,mean_td_us,error_rate";

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline std::string observations_csv(const ExperimentReport& r) {
  std::string out = kObservationsHeader;
  out.push_back('\n');
  for (const auto& row : r.rows) {
    out += row.scenario_id;
    out += ',' + std::to_string(row.trial);
    out += ',' + row.composition;
    out += ',' + std::to_string(row.n);
    out += ',' + row.outcome;
    out += ',' + detail::fmt_us(row.elapsed_us);
    out += ',' + std::to_string(row.silent_probes);
    out += ',' + detail::fmt_us(row.presence_us);
    out.push_back('\n');
  }
  return out;
}

inline std::string summary_csv(const ExperimentReport& r) {
  std::string out = kSummaryHeader;
  out.push_back('\n');
  for (const auto& row : r.summary) {
    out += row.scheme;
    out += ',' + std::to_string(row.n);
    out += ',' + std::to_string(row.trials);
    out += ',' + detail::fmt_us(row.mean_te_us);
    out += ',' + detail::fmt_us(row.mean_td_us);
    out += ',' + detail::fmt_rate(row.error_rate);
    out.push_back('\n');
  }
  return out;
}

inline std::string verdicts_json(const ExperimentReport& r) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
    const auto& v = r.verdicts[i];
    out += "  {";
    out += "\"profile\": \"" + v.profile + "\", ";
    out += "\"scheme\": \"" + v.scheme + "\", ";
    out += "\"n\": " + std::to_string(v.n) + ", ";
    out += "\"trials\": " + std::to_string(v.trials) + ", ";
    out += "\"error_rate\": " + detail::fmt_rate(v.error_rate) + ", ";
    out += std::string("\"linked\": ") + (v.linked ? "true" : "false") + ", ";
    out += "\"linked_rate\": " + detail::fmt_rate(v.linked_rate) + ", ";
    out += "\"margin_us\": " + detail::fmt_us(v.margin_us);
    out += "}";
    if (i + 1 < r.verdicts.size()) out += ",";
    out += "\n";
  }
  out += "]\n";
  return out;
}

/// Writes observations.csv, summary.csv, plotdata_*.dat and (when the run
/// produced verdicts) verdict.json into out_dir. Output is byte-identical for
/// equal seeds.
inline std::vector<std::filesystem::path> emit_report(const ExperimentReport& r,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& name, const std::string& content) {
    auto path = out_dir / name;
    auto out = detail::open_out(path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
    written.push_back(path);
  };

  write("observations.csv", observations_csv(r));
  write("summary.csv", summary_csv(r));
  for (const auto& [name, points] : r.curves) {
    std::string content;
    for (const auto& [x, y] : points) {
      content += detail::fmt_us(x) + " " + detail::fmt_rate(y) + "\n";
    }
    write("plotdata_" + name + ".dat", content);
  }
  if (!r.verdicts.empty()) write("verdict.json", verdicts_json(r));
  return written;
}

}  // namespace fidosim
