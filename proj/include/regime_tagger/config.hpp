#pragma once

// Pipeline configuration: JSON in, JSON out, unknown keys rejected.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "regime_tagger/error.hpp"
#include "regime_tagger/ph.hpp"

namespace regime_tagger::config {

using nlohmann::json;
using nlohmann::ordered_json;

/// Stochastic Hopf normal form with slowly drifting lambda, integrated by
/// Euler-Maruyama.
struct HopfSource {
  double lambda0 = -1.0;
  double epsilon = 1e-3;
  std::vector<double> noise{0.05, 0.05};
  double dt = 0.01;
  double t0 = 0.0;
  double t1 = 2000.0;
  std::vector<double> x0{0.1, 0.1};
  std::size_t sample_every = 10;
  double transient = 0.0;
  std::uint64_t seed = 42;

  friend bool operator==(const HopfSource&, const HopfSource&) = default;
};

/// Deterministic Lorenz system integrated by RK4.
struct LorenzSource {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt = 0.01;
  double t0 = 0.0;
  double t1 = 100.0;
  std::vector<double> x0{1.0, 1.0, 1.0};
  std::size_t sample_every = 1;
  double transient = 20.0;

  friend bool operator==(const LorenzSource&, const LorenzSource&) = default;
};

/// External record: one time column plus value columns.
struct CsvSource {
  std::string path;
  std::string time_column;
  std::vector<std::string> value_columns;
  bool interpolate = false;
  /// Rescale every channel to zero mean and unit variance over the record.
  bool standardize_channels = false;

  friend bool operator==(const CsvSource&, const CsvSource&) = default;
};

using Source = std::variant<HopfSource, LorenzSource, CsvSource>;

struct Windowing {
  std::size_t window_len = 100;
  std::size_t stride = 50;
  /// "auto" picks raw for multichannel sources and delay for scalar ones.
  std::string mode = "auto";
  std::size_t d = 2;
  /// Unset: first zero of the channel's autocorrelation, capped at window_len / 4.
  std::optional<std::size_t> tau;
  std::size_t channel = 0;

  friend bool operator==(const Windowing&, const Windowing&) = default;
};

struct Persistence {
  int max_dim = 1;
  /// Unset means the per-window diameter.
  std::optional<double> t_max;
  double r = ph::kDefaultCapOffset;

  friend bool operator==(const Persistence&, const Persistence&) = default;
};

struct Features {
  std::size_t k_lengths = 2;
  int dim = 1;
  bool standardize = false;

  friend bool operator==(const Features&, const Features&) = default;
};

struct Clustering {
  std::size_t k = 2;
  std::uint64_t seed = 42;
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  double tol = 1e-9;

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

struct Output {
  std::string dir = "out";
  std::size_t plot_channel = 0;

  friend bool operator==(const Output&, const Output&) = default;
};

struct PipelineConfig {
  std::vector<Source> sources;
  Windowing windowing;
  Persistence persistence;
  Features features;
  Clustering clustering;
  Output output;
  /// 0 selects the available hardware parallelism.
  std::size_t workers = 0;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

namespace detail {

/// Reads fields from one JSON object and remembers which keys were used, so
/// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + it->dump() + ")");
    }
  }

  template <class T>
  void require(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    get(key, out);
  }

  [[nodiscard]] const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Source source_from_json(const json& j, const std::string& where) {
  ObjectReader rd(j, where);
  std::string type;
  rd.require("type", type);
  if (type == "hopf") {
    HopfSource s;
    rd.get("lambda0", s.lambda0);
    rd.get("epsilon", s.epsilon);
    rd.get("noise", s.noise);
    rd.get("dt", s.dt);
    rd.get("t0", s.t0);
    rd.get("t1", s.t1);
    rd.get("x0", s.x0);
    rd.get("sample_every", s.sample_every);
    rd.get("transient", s.transient);
    rd.get("seed", s.seed);
    rd.finish();
    return s;
  }
  if (type == "lorenz") {
    LorenzSource s;
    rd.get("sigma", s.sigma);
    rd.get("rho", s.rho);
    rd.get("beta", s.beta);
    rd.get("dt", s.dt);
    rd.get("t0", s.t0);
    rd.get("t1", s.t1);
    rd.get("x0", s.x0);
    rd.get("sample_every", s.sample_every);
    rd.get("transient", s.transient);
    rd.finish();
    return s;
  }
  if (type == "csv") {
    CsvSource s;
    rd.require("path", s.path);
    rd.require("time_column", s.time_column);
    rd.require("value_columns", s.value_columns);
    rd.get("interpolate", s.interpolate);
    rd.get("standardize_channels", s.standardize_channels);
    rd.finish();
    return s;
  }
  throw ConfigError(where + ".type: unknown source type '" + type + "' (expected hopf, lorenz or csv)");
}

inline ordered_json source_to_json(const Source& source) {
  struct Visitor {
    ordered_json operator()(const HopfSource& s) const {
      return {{"type", "hopf"},   {"lambda0", s.lambda0}, {"epsilon", s.epsilon}, {"noise", s.noise},
              {"dt", s.dt},       {"t0", s.t0},           {"t1", s.t1},           {"x0", s.x0},
              {"sample_every", s.sample_every},           {"transient", s.transient}, {"seed", s.seed}};
    }
    ordered_json operator()(const LorenzSource& s) const {
      return {{"type", "lorenz"}, {"sigma", s.sigma}, {"rho", s.rho}, {"beta", s.beta},
              {"dt", s.dt},       {"t0", s.t0},       {"t1", s.t1},   {"x0", s.x0},
              {"sample_every", s.sample_every},       {"transient", s.transient}};
    }
    ordered_json operator()(const CsvSource& s) const {
      return {{"type", "csv"},
              {"path", s.path},
              {"time_column", s.time_column},
              {"value_columns", s.value_columns},
              {"interpolate", s.interpolate},
              {"standardize_channels", s.standardize_channels}};
    }
  };
  return std::visit(Visitor{}, source);
}

inline void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline void validate_time_span(const std::string& where, double dt, double t0, double t1, std::size_t sample_every,
                               double transient) {
  check(dt > 0 && std::isfinite(dt), where + ".dt must be > 0");
  check(std::isfinite(t0) && std::isfinite(t1) && t1 > t0, where + ": t1 must exceed t0");
  check(sample_every >= 1, where + ".sample_every must be >= 1");
  check(std::isfinite(transient) && transient < t1, where + ".transient must be < t1");
}

}  // namespace detail

/// Throws ConfigError describing the first violated precondition.
inline void validate(const PipelineConfig& c) {
  using detail::check;
  check(!c.sources.empty(), "config: at least one source is required");
  for (std::size_t i = 0; i < c.sources.size(); ++i) {
    const std::string where = "sources[" + std::to_string(i) + "]";
    if (const auto* h = std::get_if<HopfSource>(&c.sources[i])) {
      detail::validate_time_span(where, h->dt, h->t0, h->t1, h->sample_every, h->transient);
      check(h->x0.size() == 2, where + ".x0 must have 2 entries");
      check(h->noise.size() == 2, where + ".noise must have 2 entries");
      for (double s : h->noise) check(s >= 0 && std::isfinite(s), where + ".noise entries must be >= 0");
    } else if (const auto* l = std::get_if<LorenzSource>(&c.sources[i])) {
      detail::validate_time_span(where, l->dt, l->t0, l->t1, l->sample_every, l->transient);
      check(l->x0.size() == 3, where + ".x0 must have 3 entries");
    } else {
      const auto& s = std::get<CsvSource>(c.sources[i]);
      check(!s.path.empty(), where + ".path must not be empty");
      check(!s.time_column.empty(), where + ".time_column must not be empty");
      check(!s.value_columns.empty(), where + ".value_columns must list at least one column");
    }
  }
  const auto& w = c.windowing;
  check(w.window_len >= 2, "windowing.window_len must be >= 2");
  check(w.stride >= 1, "windowing.stride must be >= 1");
  check(w.mode == "auto" || w.mode == "raw" || w.mode == "delay",
        "windowing.mode must be \"auto\", \"raw\" or \"delay\"");
  check(w.d >= 1 && (!w.tau || *w.tau >= 1), "windowing.d and windowing.tau must be >= 1");
  const auto& p = c.persistence;
  check(p.max_dim >= 0 && p.max_dim <= ph::kMaxHomologyDim,
        "persistence.max_dim must be between 0 and " + std::to_string(ph::kMaxHomologyDim));
  check(!p.t_max || (*p.t_max > 0 && std::isfinite(*p.t_max)), "persistence.t_max must be > 0 or \"diameter\"");
  check(p.r > 0 && std::isfinite(p.r), "persistence.r must be > 0");
  check(c.features.k_lengths >= 1, "features.k_lengths must be >= 1");
  check(c.features.dim >= 0 && c.features.dim <= p.max_dim, "features.dim must be between 0 and persistence.max_dim");
  check(c.clustering.k >= 1, "clustering.k must be >= 1");
  check(c.clustering.restarts >= 1, "clustering.restarts must be >= 1");
  check(c.clustering.max_iter >= 1, "clustering.max_iter must be >= 1");
  check(c.clustering.tol >= 0, "clustering.tol must be >= 0");
  check(!c.output.dir.empty(), "output.dir must not be empty");
}

inline PipelineConfig from_json(const json& j) {
  PipelineConfig c;
  detail::ObjectReader top(j, "config");
  const json* sources = top.child("sources");
  if (sources == nullptr || !sources->is_array()) throw ConfigError("config: 'sources' must be an array");
  for (std::size_t i = 0; i < sources->size(); ++i) {
    c.sources.push_back(detail::source_from_json((*sources)[i], "sources[" + std::to_string(i) + "]"));
  }
  if (const json* w = top.child("windowing")) {
    detail::ObjectReader rd(*w, "windowing");
    rd.get("window_len", c.windowing.window_len);
    rd.get("stride", c.windowing.stride);
    rd.get("mode", c.windowing.mode);
    rd.get("d", c.windowing.d);
    if (const json* tau = rd.child("tau")) {
      if (tau->is_string() && tau->get<std::string>() == "auto") {
        c.windowing.tau.reset();
      } else if (tau->is_number_unsigned()) {
        c.windowing.tau = tau->get<std::size_t>();
      } else {
        throw ConfigError("windowing.tau must be a positive integer or \"auto\"");
      }
    }
    rd.get("channel", c.windowing.channel);
    rd.finish();
  }
  if (const json* p = top.child("persistence")) {
    detail::ObjectReader rd(*p, "persistence");
    rd.get("max_dim", c.persistence.max_dim);
    rd.get("r", c.persistence.r);
    if (const json* t = rd.child("t_max")) {
      if (t->is_string() && t->get<std::string>() == "diameter") {
        c.persistence.t_max.reset();
      } else if (t->is_number()) {
        c.persistence.t_max = t->get<double>();
      } else {
        throw ConfigError("persistence.t_max: expected a number or \"diameter\"");
      }
    }
    rd.finish();
  }
  if (const json* f = top.child("features")) {
    detail::ObjectReader rd(*f, "features");
    rd.get("k_lengths", c.features.k_lengths);
    rd.get("dim", c.features.dim);
    rd.get("standardize", c.features.standardize);
    rd.finish();
  }
  if (const json* k = top.child("clustering")) {
    detail::ObjectReader rd(*k, "clustering");
    rd.get("k", c.clustering.k);
    rd.get("seed", c.clustering.seed);
    rd.get("restarts", c.clustering.restarts);
    rd.get("max_iter", c.clustering.max_iter);
    rd.get("tol", c.clustering.tol);
    rd.finish();
  }
  if (const json* o = top.child("output")) {
    detail::ObjectReader rd(*o, "output");
    rd.get("dir", c.output.dir);
    rd.get("plot_channel", c.output.plot_channel);
    rd.finish();
  }
  top.get("workers", c.workers);
  top.finish();
  validate(c);
  return c;
}

inline ordered_json to_json(const PipelineConfig& c) {
  ordered_json sources = ordered_json::array();
  for (const auto& s : c.sources) sources.push_back(detail::source_to_json(s));
  ordered_json t_max = c.persistence.t_max ? ordered_json(*c.persistence.t_max) : ordered_json("diameter");
  return {
      {"sources", sources},
      {"windowing",
       {{"window_len", c.windowing.window_len},
        {"stride", c.windowing.stride},
        {"mode", c.windowing.mode},
        {"d", c.windowing.d},
        {"tau", c.windowing.tau ? ordered_json(*c.windowing.tau) : ordered_json("auto")},
        {"channel", c.windowing.channel}}},
      {"persistence", {{"max_dim", c.persistence.max_dim}, {"t_max", t_max}, {"r", c.persistence.r}}},
      {"features",
       {{"k_lengths", c.features.k_lengths}, {"dim", c.features.dim}, {"standardize", c.features.standardize}}},
      {"clustering",
       {{"k", c.clustering.k},
        {"seed", c.clustering.seed},
        {"restarts", c.clustering.restarts},
        {"max_iter", c.clustering.max_iter},
        {"tol", c.clustering.tol}}},
      {"output", {{"dir", c.output.dir}, {"plot_channel", c.output.plot_channel}}},
      {"workers", c.workers},
  };
}

}  // namespace regime_tagger::config
