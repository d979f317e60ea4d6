#pragma once

#include <splatstream/error.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace splatstream {

struct MovementEntry {
  double t_ms = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double tx = 0.0, ty = 0.0, tz = 0.0;

  friend bool operator==(const MovementEntry&, const MovementEntry&) = default;
};

struct MovementTrace {
  std::string name;
  std::vector<MovementEntry> entries;
};

struct BandwidthEntry {
  double t_ms = 0.0;
  double rate_kbps = 0.0;

  friend bool operator==(const BandwidthEntry&, const BandwidthEntry&) = default;
};

struct BandwidthTrace {
  std::string name;
  std::vector<BandwidthEntry> entries;

  /// Link rate in bytes per second (kbps = 1000 bit/s).
  static double kbps_to_bytes(double kbps) { return kbps * 1000.0 / 8.0; }
};

inline constexpr std::string_view kMovementHeader = "t_ms,azimuth_deg,elevation_deg,tx,ty,tz";
inline constexpr std::string_view kBandwidthHeader = "t_ms,rate_kbps";

namespace detail {

inline std::string trace_where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

inline std::vector<double> parse_csv_numbers(std::string_view line, std::size_t expected, const std::string& where) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) comma = line.size();
    std::string field(line.substr(start, comma - start));
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
      values.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, where + ": bad number '" + field + "'");
    }
    start = comma + 1;
  }
  if (values.size() != expected) {
    throw Error(ErrorKind::ParseError,
                where + ": expected " + std::to_string(expected) + " fields, got " + std::to_string(values.size()));
  }
  return values;
}

template <class OnRow>
void read_trace_csv(std::istream& in, std::string_view header, const std::string& source, std::size_t fields,
                    OnRow&& on_row) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != header) {
        throw Error(ErrorKind::ParseError,
                    trace_where(source, line_no) + ": expected header '" + std::string(header) + "'");
      }
      saw_header = true;
      continue;
    }
    on_row(parse_csv_numbers(line, fields, trace_where(source, line_no)), line_no);
  }
  if (!saw_header) throw Error(ErrorKind::ParseError, source + ": missing header");
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV with header `t_ms,azimuth_deg,elevation_deg,tx,ty,tz`; timestamps
/// strictly increasing.
inline MovementTrace parse_movement_trace(std::istream& in, const std::string& source = "<trace>") {
  MovementTrace trace;
  trace.name = source;
  detail::read_trace_csv(in, kMovementHeader, source, 6, [&](const std::vector<double>& v, std::size_t line) {
    if (!trace.entries.empty() && !(v[0] > trace.entries.back().t_ms)) {
      throw Error(ErrorKind::NonMonotonicTime, detail::trace_where(source, line) + ": t_ms " +
                                                   detail::fmt_double(v[0]) + " does not increase");
    }
    trace.entries.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
  });
  if (trace.entries.empty()) throw Error(ErrorKind::ParseError, source + ": trace has no entries");
  return trace;
}

inline MovementTrace load_movement_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  auto trace = parse_movement_trace(in, path.string());
  trace.name = path.filename().string();
  return trace;
}

inline std::string format_movement_trace(const MovementTrace& trace) {
  std::ostringstream out;
  out << kMovementHeader << "\n";
  for (const auto& e : trace.entries) {
    out << detail::fmt_double(e.t_ms) << ',' << detail::fmt_double(e.azimuth_deg) << ','
        << detail::fmt_double(e.elevation_deg) << ',' << detail::fmt_double(e.tx) << ','
        << detail::fmt_double(e.ty) << ',' << detail::fmt_double(e.tz) << "\n";
  }
  return out.str();
}

/// CSV with header `t_ms,rate_kbps`; first timestamp 0, strictly increasing,
/// positive rates. Each rate holds until the next entry; the last one holds
/// forever.
inline BandwidthTrace parse_bandwidth_trace(std::istream& in, const std::string& source = "<bandwidth>") {
  BandwidthTrace trace;
  trace.name = source;
  detail::read_trace_csv(in, kBandwidthHeader, source, 2, [&](const std::vector<double>& v, std::size_t line) {
    const auto where = detail::trace_where(source, line);
    if (trace.entries.empty() && v[0] != 0.0) {
      throw Error(ErrorKind::ParseError, where + ": bandwidth trace must start at t_ms 0");
    }
    if (!trace.entries.empty() && !(v[0] > trace.entries.back().t_ms)) {
      throw Error(ErrorKind::NonMonotonicTime, where + ": t_ms does not increase");
    }
    if (!(v[1] > 0.0)) throw Error(ErrorKind::ParseError, where + ": rate must be positive");
    trace.entries.push_back({v[0], v[1]});
  });
  if (trace.entries.empty()) throw Error(ErrorKind::ParseError, source + ": trace has no entries");
  return trace;
}

inline BandwidthTrace load_bandwidth_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  auto trace = parse_bandwidth_trace(in, path.string());
  trace.name = path.filename().string();
  return trace;
}

inline std::string format_bandwidth_trace(const BandwidthTrace& trace) {
  std::ostringstream out;
  out << kBandwidthHeader << "\n";
  for (const auto& e : trace.entries) {
    out << detail::fmt_double(e.t_ms) << ',' << detail::fmt_double(e.rate_kbps) << "\n";
  }
  return out.str();
}

}  // namespace splatstream
