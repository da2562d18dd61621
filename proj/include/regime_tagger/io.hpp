#pragma once

// CSV and JSON formats for every pipeline stage, plus ingestion of external
// multichannel records.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "regime_tagger/cluster.hpp"
#include "regime_tagger/embed.hpp"
#include "regime_tagger/error.hpp"
#include "regime_tagger/features.hpp"
#include "regime_tagger/ph.hpp"
#include "regime_tagger/sim.hpp"

namespace regime_tagger::io {

/// Shortest text that round-trips to the same double, capped at 17
/// significant digits.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) throw std::logic_error("format_double failed");
  return {buf, res.ptr};
}

inline std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string cell(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    // Trim whitespace and one level of double quotes.
    const auto first = cell.find_first_not_of(" \t");
    const auto last = cell.find_last_not_of(" \t");
    cell = first == std::string::npos ? std::string{} : cell.substr(first, last - first + 1);
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cells.push_back(std::move(cell));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number in the file for every row.
  std::vector<std::size_t> line_numbers;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line);
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw DataError("'" + path + "' has no header");
  return table;
}

namespace detail {

inline double cell_number(const CsvTable& t, std::size_t row, std::size_t col, const std::string& path) {
  auto v = parse_double(t.rows[row][col]);
  if (!v || !std::isfinite(*v)) {
    throw DataError(path + ":" + std::to_string(t.line_numbers[row]) + ": non-numeric value '" + t.rows[row][col] +
                    "' in column '" + t.header[col] + "'");
  }
  return *v;
}

inline std::size_t cell_index(const CsvTable& t, std::size_t row, std::size_t col, const std::string& path) {
  const double v = cell_number(t, row, col, path);
  if (v < 0 || v != std::floor(v)) {
    throw DataError(path + ":" + std::to_string(t.line_numbers[row]) + ": expected a non-negative integer in '" +
                    t.header[col] + "'");
  }
  return static_cast<std::size_t>(v);
}

inline void expect_header(const CsvTable& t, std::size_t fixed, const std::vector<std::string>& prefix,
                          const std::string& path) {
  if (t.header.size() < fixed || !std::equal(prefix.begin(), prefix.end(), t.header.begin())) {
    std::string want;
    for (const auto& p : prefix) want += (want.empty() ? "" : ",") + p;
    throw DataError("'" + path + "': header must start with " + want);
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

using Logger = std::function<void(const std::string&)>;

inline void log_to_stderr(const std::string& message) { std::clog << message << '\n'; }

struct IngestOptions {
  /// Fill missing or non-numeric value cells by linear interpolation in time.
  bool interpolate = false;
  Logger log = log_to_stderr;
};

/// Reads a multichannel record: one time column plus the named value
/// columns, in the given order. Rows are sorted by time (stable).
inline embed::TimeSeries ingest_csv(const std::string& path, const std::string& time_column,
                                    const std::vector<std::string>& value_columns, const IngestOptions& options = {}) {
  const auto table = read_csv(path);
  const auto tcol = table.column(time_column);
  if (!tcol) throw DataError("'" + path + "': no column named '" + time_column + "'");
  if (value_columns.empty()) throw ConfigError("ingest_csv: no value columns selected");
  std::vector<std::size_t> vcols;
  for (const auto& name : value_columns) {
    auto c = table.column(name);
    if (!c) throw DataError("'" + path + "': no column named '" + name + "'");
    vcols.push_back(*c);
  }
  const std::size_t n = table.rows.size();
  if (n < 2) throw DataError("'" + path + "': needs at least 2 data rows, found " + std::to_string(n));

  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = detail::cell_number(table, i, *tcol, path);

  const std::size_t c = vcols.size();
  std::vector<std::optional<double>> raw(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      auto v = parse_double(table.rows[i][vcols[j]]);
      if (v && std::isfinite(*v)) {
        raw[i * c + j] = *v;
      } else if (!options.interpolate) {
        throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": missing or non-numeric value '" +
                        table.rows[i][vcols[j]] + "' in column '" + value_columns[j] + "'");
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  std::string duplicates;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (times[order[k]] == times[order[k + 1]]) {
      duplicates += (duplicates.empty() ? "" : ", ") + format_double(times[order[k]]) + " (lines " +
                    std::to_string(table.line_numbers[order[k]]) + " and " +
                    std::to_string(table.line_numbers[order[k + 1]]) + ")";
    }
  }
  if (!duplicates.empty()) throw DataError("'" + path + "': duplicate timestamps: " + duplicates);

  std::vector<double> sorted_times(n);
  std::vector<double> values(n * c);
  for (std::size_t k = 0; k < n; ++k) sorted_times[k] = times[order[k]];
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& cell = raw[order[k] * c + j];
      if (cell) {
        values[k * c + j] = *cell;
        continue;
      }
      // Linear interpolation between the nearest present neighbours.
      std::optional<std::size_t> lo;
      std::optional<std::size_t> hi;
      for (std::size_t q = k; q-- > 0;) {
        if (raw[order[q] * c + j]) {
          lo = q;
          break;
        }
      }
      for (std::size_t q = k + 1; q < n; ++q) {
        if (raw[order[q] * c + j]) {
          hi = q;
          break;
        }
      }
      const auto line = table.line_numbers[order[k]];
      if (!lo || !hi) {
        throw DataError(path + ":" + std::to_string(line) + ": cannot interpolate '" + value_columns[j] +
                        "' at the edge of the record");
      }
      const double t0 = sorted_times[*lo];
      const double t1 = sorted_times[*hi];
      const double v0 = *raw[order[*lo] * c + j];
      const double v1 = *raw[order[*hi] * c + j];
      const double v = v0 + (v1 - v0) * (sorted_times[k] - t0) / (t1 - t0);
      values[k * c + j] = v;
      if (options.log) {
        options.log("interpolated " + value_columns[j] + " at line " + std::to_string(line) + " (t=" +
                    format_double(sorted_times[k]) + "): " + format_double(v));
      }
    }
  }
  return embed::TimeSeries(std::move(sorted_times), std::move(values), value_columns);
}

// ---- series / trajectories: t,<channel>,... --------------------------------

inline void write_series_csv(std::ostream& out, const embed::TimeSeries& series) {
  out << 't';
  for (const auto& name : series.channel_names()) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_double(series.time(i));
    for (double v : series.sample(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void write_series_csv(const std::string& path, const embed::TimeSeries& series) {
  auto out = detail::open_out(path);
  write_series_csv(out, series);
}

inline void write_trajectory_csv(const std::string& path, const sim::Trajectory& trajectory) {
  write_series_csv(path, embed::to_series(trajectory));
}

/// Reads any series CSV whose first column is time; every other column is a
/// channel.
inline embed::TimeSeries read_series_csv(const std::string& path, const IngestOptions& options = {}) {
  const auto table = read_csv(path);
  if (table.header.size() < 2) throw DataError("'" + path + "': needs a time column and at least one channel");
  std::vector<std::string> channels(table.header.begin() + 1, table.header.end());
  return ingest_csv(path, table.header.front(), channels, options);
}

// ---- windows: window_index,point_index,coord0,... --------------------------

inline void write_windows_csv(const std::string& path, const std::vector<embed::Window>& windows) {
  auto out = detail::open_out(path);
  const std::size_t dim = windows.empty() ? 0 : windows.front().cloud.dim();
  out << "window_index,point_index";
  for (std::size_t k = 0; k < dim; ++k) out << ",coord" << k;
  out << '\n';
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& cloud = windows[w].cloud;
    for (std::size_t p = 0; p < cloud.size(); ++p) {
      out << w << ',' << p;
      for (double v : cloud.point(p)) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

inline std::vector<embed::PointCloud> read_windows_csv(const std::string& path) {
  const auto t = read_csv(path);
  detail::expect_header(t, 3, {"window_index", "point_index"}, path);
  const std::size_t dim = t.header.size() - 2;
  std::vector<std::vector<double>> coords;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto w = detail::cell_index(t, r, 0, path);
    const auto p = detail::cell_index(t, r, 1, path);
    if (w == coords.size()) coords.emplace_back();
    if (w + 1 != coords.size() || p * dim != coords.back().size()) {
      throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": windows and points must be consecutive");
    }
    for (std::size_t k = 0; k < dim; ++k) coords.back().push_back(detail::cell_number(t, r, k + 2, path));
  }
  std::vector<embed::PointCloud> clouds;
  clouds.reserve(coords.size());
  for (auto& c : coords) clouds.emplace_back(dim, std::move(c));
  return clouds;
}

// ---- window metadata: window_index,start_index,start_time -----------------

inline void write_window_meta_csv(const std::string& path, const std::vector<embed::Window>& windows,
                                  std::size_t first_index = 0) {
  auto out = detail::open_out(path);
  out << "window_index,start_index,start_time\n";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    out << first_index + w << ',' << windows[w].start_index << ',' << format_double(windows[w].start_time) << '\n';
  }
}

inline std::vector<features::WindowInfo> read_window_meta_csv(const std::string& path) {
  const auto t = read_csv(path);
  detail::expect_header(t, 3, {"window_index", "start_index", "start_time"}, path);
  std::vector<features::WindowInfo> info;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    info.push_back({detail::cell_index(t, r, 0, path), detail::cell_number(t, r, 2, path)});
  }
  return info;
}

// ---- diagrams: window_index,dim,birth,death,capped -------------------------

inline void write_diagrams_csv(std::ostream& out, const std::vector<ph::PersistenceDiagram>& diagrams,
                               std::size_t first_index = 0) {
  out << "window_index,dim,birth,death,capped\n";
  for (std::size_t w = 0; w < diagrams.size(); ++w) {
    for (const auto& bar : diagrams[w].bars) {
      out << first_index + w << ',' << bar.dim << ',' << format_double(bar.birth) << ',' << format_double(bar.death)
          << ',' << (bar.capped ? 1 : 0) << '\n';
    }
  }
}

inline void write_diagrams_csv(const std::string& path, const std::vector<ph::PersistenceDiagram>& diagrams) {
  auto out = detail::open_out(path);
  write_diagrams_csv(out, diagrams);
}

/// Rebuilds diagrams from CSV. The cap offset r is not stored in the file, so
/// t_max is recovered as (capped death - r).
inline std::vector<ph::PersistenceDiagram> read_diagrams_csv(const std::string& path,
                                                             double r = ph::kDefaultCapOffset) {
  const auto t = read_csv(path);
  detail::expect_header(t, 5, {"window_index", "dim", "birth", "death", "capped"}, path);
  std::vector<ph::PersistenceDiagram> diagrams;
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const auto w = detail::cell_index(t, row, 0, path);
    if (w == diagrams.size()) {
      diagrams.emplace_back();
      diagrams.back().max_dim = 0;
    }
    if (w + 1 != diagrams.size()) {
      throw DataError(path + ":" + std::to_string(t.line_numbers[row]) + ": window indices must be consecutive");
    }
    ph::Bar bar;
    bar.dim = static_cast<int>(detail::cell_index(t, row, 1, path));
    bar.birth = detail::cell_number(t, row, 2, path);
    bar.death = detail::cell_number(t, row, 3, path);
    bar.capped = detail::cell_index(t, row, 4, path) != 0;
    auto& d = diagrams.back();
    d.bars.push_back(bar);
    d.max_dim = std::max(d.max_dim, bar.dim);
    if (bar.dim == 0) ++d.n_points;
    d.r = r;
    if (bar.capped) d.t_max = bar.death - r;
  }
  return diagrams;
}

// ---- features: window_index,start_time,len1,... -----------------------------

inline void write_features_csv(std::ostream& out, const std::vector<features::FeatureVector>& features) {
  const std::size_t k = features.empty() ? 0 : features.front().lengths.size();
  out << "window_index,start_time";
  for (std::size_t i = 1; i <= k; ++i) out << ",len" << i;
  out << '\n';
  for (const auto& f : features) {
    out << f.window_index << ',' << format_double(f.start_time);
    for (double v : f.lengths) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void write_features_csv(const std::string& path, const std::vector<features::FeatureVector>& features) {
  auto out = detail::open_out(path);
  write_features_csv(out, features);
}

inline std::vector<features::FeatureVector> read_features_csv(const std::string& path) {
  const auto t = read_csv(path);
  detail::expect_header(t, 3, {"window_index", "start_time"}, path);
  std::vector<features::FeatureVector> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    features::FeatureVector f;
    f.window_index = detail::cell_index(t, r, 0, path);
    f.start_time = detail::cell_number(t, r, 1, path);
    for (std::size_t c = 2; c < t.header.size(); ++c) f.lengths.push_back(detail::cell_number(t, r, c, path));
    out.push_back(std::move(f));
  }
  return out;
}

// ---- tagged windows: window_index,start_time,label,len1,... ----------------

struct TaggedWindow {
  std::size_t window_index = 0;
  double start_time = 0.0;
  std::size_t label = 0;
  std::vector<double> features;

  friend bool operator==(const TaggedWindow&, const TaggedWindow&) = default;
};

inline void write_tagged_csv(std::ostream& out, const std::vector<TaggedWindow>& tagged) {
  const std::size_t k = tagged.empty() ? 0 : tagged.front().features.size();
  out << "window_index,start_time,label";
  for (std::size_t i = 1; i <= k; ++i) out << ",len" << i;
  out << '\n';
  for (const auto& w : tagged) {
    out << w.window_index << ',' << format_double(w.start_time) << ',' << w.label;
    for (double v : w.features) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void write_tagged_csv(const std::string& path, const std::vector<TaggedWindow>& tagged) {
  auto out = detail::open_out(path);
  write_tagged_csv(out, tagged);
}

inline std::vector<TaggedWindow> read_tagged_csv(const std::string& path) {
  const auto t = read_csv(path);
  detail::expect_header(t, 3, {"window_index", "start_time", "label"}, path);
  std::vector<TaggedWindow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TaggedWindow w;
    w.window_index = detail::cell_index(t, r, 0, path);
    w.start_time = detail::cell_number(t, r, 1, path);
    w.label = detail::cell_index(t, r, 2, path);
    for (std::size_t c = 3; c < t.header.size(); ++c) w.features.push_back(detail::cell_number(t, r, c, path));
    out.push_back(std::move(w));
  }
  return out;
}

// ---- model JSON: {k, centroids, inertia, seed} ------------------------------

inline nlohmann::ordered_json model_to_json(const cluster::KMeansModel& model) {
  return {{"k", model.k}, {"centroids", model.centroids}, {"inertia", model.inertia}, {"seed", model.seed}};
}

inline cluster::KMeansModel model_from_json(const nlohmann::json& j) {
  try {
    cluster::KMeansModel m;
    m.k = j.at("k").get<std::size_t>();
    m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    m.inertia = j.at("inertia").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    if (m.centroids.size() != m.k) throw DataError("model: centroid count differs from k");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace regime_tagger::io
