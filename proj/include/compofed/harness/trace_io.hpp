#pragma once

// Trace CSV: header round,algorithm,seed,optimality,dist_sq,drift_sq,omega,wall_ms
// with one row per global model (R + 1 rows) and floats at 17 significant
// digits. Quantities that do not apply are written as "nan".

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compofed/core.hpp"
#include "compofed/dataset_io.hpp"

namespace compofed::harness {

namespace fs = std::filesystem;

struct MetricRow {
  std::size_t round = 0;
  double optimality = std::numeric_limits<double>::quiet_NaN();
  double dist_sq = std::numeric_limits<double>::quiet_NaN();
  double drift_sq = std::numeric_limits<double>::quiet_NaN();
  double omega = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

inline constexpr const char* kTraceHeader = "round,algorithm,seed,optimality,dist_sq,drift_sq,omega,wall_ms";

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  return compofed::detail::format_double(v);
}

inline void write_trace_csv(const fs::path& path, const std::string& algorithm, std::uint64_t seed,
                            const std::vector<MetricRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace " + path.string());
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.round << ',' << algorithm << ',' << seed << ',' << format_metric(r.optimality) << ','
        << format_metric(r.dist_sq) << ',' << format_metric(r.drift_sq) << ',' << format_metric(r.omega) << ','
        << format_metric(r.wall_ms) << '\n';
  }
  if (!out) throw Error("write failed for trace " + path.string());
}

struct TraceFile {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
};

inline TraceFile read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kTraceHeader, path.string() + ": unexpected trace header");
  TraceFile trace;
  std::size_t line_no = 1;
  auto num = [&](const std::string& s) {
    return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : compofed::detail::parse_double(s, path, line_no);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = compofed::detail::split_csv(line);
    require(cells.size() == 8, path.string() + ":" + std::to_string(line_no) + ": expected 8 columns");
    MetricRow row;
    row.round = static_cast<std::size_t>(std::stoull(cells[0]));
    trace.algorithm = cells[1];
    trace.seed = std::stoull(cells[2]);
    row.optimality = num(cells[3]);
    row.dist_sq = num(cells[4]);
    row.drift_sq = num(cells[5]);
    row.omega = num(cells[6]);
    row.wall_ms = num(cells[7]);
    trace.rows.push_back(row);
  }
  return trace;
}

inline fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace compofed::harness
