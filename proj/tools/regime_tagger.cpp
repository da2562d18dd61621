// Command-line front end: one subcommand per pipeline stage plus `pipeline`
// for a full configured run and `report` for summarizing tagged windows.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "regime_tagger/cluster.hpp"
#include "regime_tagger/config.hpp"
#include "regime_tagger/embed.hpp"
#include "regime_tagger/error.hpp"
#include "regime_tagger/features.hpp"
#include "regime_tagger/io.hpp"
#include "regime_tagger/ph.hpp"
#include "regime_tagger/pipeline.hpp"
#include "regime_tagger/sim.hpp"

namespace rt = regime_tagger;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::size_t workers = 0;
  std::string out_dir = ".";
  bool quiet = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* out_dir_opt = nullptr;
};

Globals g;

void note(const std::string& message) {
  if (!g.quiet) std::cerr << message << '\n';
}

std::string out_path(const std::string& explicit_path, const std::string& default_name) {
  if (!explicit_path.empty()) return explicit_path;
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / default_name).string();
}

/// "diameter" or a positive number.
std::optional<double> parse_t_max(const std::string& text) {
  if (text.empty() || text == "diameter") return std::nullopt;
  auto v = rt::io::parse_double(text);
  if (!v || !(*v > 0)) throw rt::ConfigError("--t-max: expected a positive number or \"diameter\", got '" + text + "'");
  return v;
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string system;
  std::string out;
  rt::config::HopfSource hopf;
  rt::config::LorenzSource lorenz;
  std::optional<double> dt, t0, t1, transient;
  std::optional<std::size_t> sample_every;
  std::vector<double> x0;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* sub = app.add_subcommand("simulate", "Integrate a built-in system and write its trajectory CSV");
  sub->add_option("--system", a.system, "hopf or lorenz")->required()->check(CLI::IsMember({"hopf", "lorenz"}));
  sub->add_option("--out", a.out, "Output CSV (default <out-dir>/series.csv)");
  sub->add_option("--lambda0", a.hopf.lambda0, "Hopf: lambda at t=0")->capture_default_str();
  sub->add_option("--epsilon", a.hopf.epsilon, "Hopf: drift rate of lambda")->capture_default_str();
  sub->add_option("--noise", a.hopf.noise, "Hopf: noise intensity per coordinate")->expected(2);
  sub->add_option("--sigma", a.lorenz.sigma, "Lorenz: sigma")->capture_default_str();
  sub->add_option("--rho", a.lorenz.rho, "Lorenz: rho")->capture_default_str();
  sub->add_option("--beta", a.lorenz.beta, "Lorenz: beta")->capture_default_str();
  sub->add_option("--dt", a.dt, "Integration step");
  sub->add_option("--t0", a.t0, "Start time");
  sub->add_option("--t1", a.t1, "End time");
  sub->add_option("--transient", a.transient, "Drop samples before this time");
  sub->add_option("--sample-every", a.sample_every, "Keep every n-th integration step");
  sub->add_option("--x0", a.x0, "Initial state");
}

int run_simulate(const SimulateArgs& a) {
  rt::config::Source source;
  auto apply = [&](auto s) {
    if (a.dt) s.dt = *a.dt;
    if (a.t0) s.t0 = *a.t0;
    if (a.t1) s.t1 = *a.t1;
    if (a.transient) s.transient = *a.transient;
    if (a.sample_every) s.sample_every = *a.sample_every;
    if (!a.x0.empty()) s.x0 = a.x0;
    return s;
  };
  if (a.system == "hopf") {
    auto h = apply(a.hopf);
    if (*g.seed_opt) h.seed = g.seed;
    source = h;
  } else {
    source = apply(a.lorenz);
  }
  rt::config::PipelineConfig check;
  check.sources = {source};
  rt::config::validate(check);
  const auto series = rt::pipeline::load_source(source);
  const auto path = out_path(a.out, "series.csv");
  rt::io::write_series_csv(path, series);
  note("wrote " + std::to_string(series.size()) + " samples to " + path);
  return 0;
}

// ---- embed ----------------------------------------------------------------------

struct EmbedArgs {
  std::string input;
  std::string time_column;
  std::vector<std::string> columns;
  bool interpolate = false;
  bool standardize_channels = false;
  rt::config::Windowing windowing;
  std::string out;
  std::string meta;
};

void add_embed(CLI::App& app, EmbedArgs& a) {
  auto* sub = app.add_subcommand("embed", "Cut a series CSV into sliding-window point clouds");
  sub->add_option("--input", a.input, "Series CSV (first column is time unless --time-column)")->required();
  sub->add_option("--time-column", a.time_column, "Name of the time column");
  sub->add_option("--columns", a.columns, "Value columns, in order (default: all but time)")->delimiter(',');
  sub->add_flag("--interpolate", a.interpolate, "Fill missing cells by linear interpolation");
  sub->add_flag("--standardize-channels", a.standardize_channels, "Rescale channels to zero mean, unit variance");
  sub->add_option("--window-len", a.windowing.window_len, "Samples per window")->capture_default_str();
  sub->add_option("--stride", a.windowing.stride, "Samples between window starts")->capture_default_str();
  sub->add_option("--mode", a.windowing.mode, "auto, raw or delay (auto: raw for multichannel input)")
      ->check(CLI::IsMember({"auto", "raw", "delay"}))
      ->capture_default_str();
  sub->add_option("--d", a.windowing.d, "Delay embedding dimension")->capture_default_str();
  sub->add_option("--tau", a.windowing.tau, "Delay lag in samples (default: first autocorrelation zero)");
  sub->add_option("--channel", a.windowing.channel, "Channel used in delay mode")->capture_default_str();
  sub->add_option("--out", a.out, "Windows CSV (default <out-dir>/windows.csv)");
  sub->add_option("--meta", a.meta, "Window metadata CSV (default <out-dir>/windows_meta.csv)");
}

int run_embed(const EmbedArgs& a) {
  rt::embed::TimeSeries series = [&] {
    rt::io::IngestOptions opt;
    opt.interpolate = a.interpolate;
    opt.log = g.quiet ? rt::io::Logger{} : rt::io::Logger{rt::io::log_to_stderr};
    if (a.time_column.empty() && a.columns.empty()) return rt::io::read_series_csv(a.input, opt);
    const auto table = rt::io::read_csv(a.input);
    if (table.header.empty()) throw rt::DataError("'" + a.input + "' has no header");
    const std::string time = a.time_column.empty() ? table.header.front() : a.time_column;
    std::vector<std::string> columns = a.columns;
    if (columns.empty()) {
      for (const auto& h : table.header) {
        if (h != time) columns.push_back(h);
      }
    }
    return rt::io::ingest_csv(a.input, time, columns, opt);
  }();
  if (a.standardize_channels) series = rt::pipeline::standardize_channels(series);
  const auto windows = rt::embed::sliding_windows(series, a.windowing.window_len, a.windowing.stride,
                                                  rt::pipeline::window_mode(a.windowing, series));
  const auto path = out_path(a.out, "windows.csv");
  const auto meta = out_path(a.meta, "windows_meta.csv");
  rt::io::write_windows_csv(path, windows);
  rt::io::write_window_meta_csv(meta, windows);
  note("wrote " + std::to_string(windows.size()) + " windows to " + path);
  return 0;
}

// ---- persist --------------------------------------------------------------------

struct PersistArgs {
  std::string input;
  int max_dim = 1;
  std::string t_max;
  double r = rt::ph::kDefaultCapOffset;
  std::string out;
};

void add_persist(CLI::App& app, PersistArgs& a) {
  auto* sub = app.add_subcommand("persist", "Compute Vietoris-Rips persistence diagrams for a windows CSV");
  sub->add_option("--input", a.input, "Windows CSV")->required();
  sub->add_option("--max-dim", a.max_dim, "Highest homology degree")->check(CLI::Range(0, rt::ph::kMaxHomologyDim))->capture_default_str();
  sub->add_option("--t-max", a.t_max, "Filtration cutoff, a number or 'diameter' (default)");
  sub->add_option("--r", a.r, "Cap offset for bars alive at the cutoff")->capture_default_str();
  sub->add_option("--out", a.out, "Diagrams CSV (default <out-dir>/diagrams.csv)");
}

int run_persist(const PersistArgs& a) {
  if (!(a.r > 0)) throw rt::ConfigError("--r must be > 0");
  const rt::config::Persistence p{a.max_dim, parse_t_max(a.t_max), a.r};
  const auto clouds = rt::io::read_windows_csv(a.input);
  if (clouds.empty()) throw rt::DataError("'" + a.input + "' holds no windows");
  const auto diagrams = rt::pipeline::persist_all(clouds, p, rt::pipeline::resolve_workers(g.workers));
  const auto path = out_path(a.out, "diagrams.csv");
  rt::io::write_diagrams_csv(path, diagrams);
  note("wrote " + std::to_string(diagrams.size()) + " diagrams to " + path);
  return 0;
}

// ---- featurize ------------------------------------------------------------------

struct FeaturizeArgs {
  std::string input;
  std::string meta;
  rt::config::Features features;
  double r = rt::ph::kDefaultCapOffset;
  std::string out;
};

void add_featurize(CLI::App& app, FeaturizeArgs& a) {
  auto* sub = app.add_subcommand("featurize", "Reduce diagrams to top persistence lengths");
  sub->add_option("--input", a.input, "Diagrams CSV")->required();
  sub->add_option("--meta", a.meta, "Window metadata CSV for start times");
  sub->add_option("--k-lengths", a.features.k_lengths, "Number of lengths per window")->capture_default_str();
  sub->add_option("--dim", a.features.dim, "Homology degree of the bars")->capture_default_str();
  sub->add_option("--r", a.r, "Cap offset used when the diagrams were computed")->capture_default_str();
  sub->add_option("--out", a.out, "Features CSV (default <out-dir>/features.csv)");
}

int run_featurize(const FeaturizeArgs& a) {
  if (a.features.k_lengths < 1) throw rt::ConfigError("--k-lengths must be >= 1");
  const auto diagrams = rt::io::read_diagrams_csv(a.input, a.r);
  std::vector<rt::features::WindowInfo> info;
  if (!a.meta.empty()) {
    info = rt::io::read_window_meta_csv(a.meta);
  } else {
    for (std::size_t i = 0; i < diagrams.size(); ++i) info.push_back({i, static_cast<double>(i)});
  }
  const auto fv = rt::pipeline::featurize_all(diagrams, info, a.features, rt::pipeline::resolve_workers(g.workers));
  const auto path = out_path(a.out, "features.csv");
  rt::io::write_features_csv(path, fv);
  note("wrote " + std::to_string(fv.size()) + " feature vectors to " + path);
  return 0;
}

// ---- tag ------------------------------------------------------------------------

struct TagArgs {
  std::string input;
  rt::config::Clustering clustering;
  bool standardize = false;
  std::string model_in;
  std::string model_out;
  std::string out;
};

void add_tag(CLI::App& app, TagArgs& a) {
  auto* sub = app.add_subcommand("tag", "Fit k-means on feature vectors (or apply a saved model) and label windows");
  sub->add_option("--input", a.input, "Features CSV")->required();
  sub->add_option("--k", a.clustering.k, "Number of clusters")->capture_default_str();
  sub->add_option("--restarts", a.clustering.restarts, "k-means++ restarts")->capture_default_str();
  sub->add_option("--max-iter", a.clustering.max_iter, "Lloyd iteration cap")->capture_default_str();
  sub->add_option("--tol", a.clustering.tol, "Centroid movement tolerance")->capture_default_str();
  sub->add_flag("--standardize", a.standardize, "Standardize feature columns before fitting");
  sub->add_option("--model-in", a.model_in, "Apply this model instead of fitting");
  sub->add_option("--model-out", a.model_out, "Model JSON (default <out-dir>/model.json)");
  sub->add_option("--out", a.out, "Tagged CSV (default <out-dir>/tagged.csv)");
}

int run_tag(TagArgs a) {
  auto fv = rt::io::read_features_csv(a.input);
  if (fv.empty()) throw rt::DataError("'" + a.input + "' holds no feature vectors");
  std::vector<rt::io::TaggedWindow> tagged;
  if (!a.model_in.empty()) {
    const auto model = rt::io::model_from_json(rt::io::read_json(a.model_in));
    if (a.standardize) rt::features::standardize(fv);
    for (const auto& f : fv) tagged.push_back({f.window_index, f.start_time, rt::cluster::kmeans_predict(model, f.lengths), f.lengths});
  } else {
    if (*g.seed_opt) a.clustering.seed = g.seed;
    if (a.clustering.k < 1 || a.clustering.restarts < 1 || a.clustering.max_iter < 1) {
      throw rt::ConfigError("--k, --restarts and --max-iter must be >= 1");
    }
    auto t = rt::pipeline::tag_features(fv, a.clustering, a.standardize);
    const auto model_path = out_path(a.model_out, "model.json");
    rt::io::write_json(model_path, rt::io::model_to_json(t.model));
    note("wrote model to " + model_path);
    tagged = std::move(t.tagged);
  }
  const auto path = out_path(a.out, "tagged.csv");
  rt::io::write_tagged_csv(path, tagged);
  note("wrote " + std::to_string(tagged.size()) + " tagged windows to " + path);
  return 0;
}

// ---- pipeline -------------------------------------------------------------------

struct PipelineArgs {
  std::string config;
  std::vector<std::string> sets;
  bool print_config = false;
};

void add_pipeline(CLI::App& app, PipelineArgs& a) {
  auto* sub = app.add_subcommand("pipeline", "Run every stage from a JSON config");
  sub->add_option("--config", a.config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--set", a.sets, "Override a config field, e.g. windowing.stride=10 or sources.0.rho=24.5");
  sub->add_flag("--print-config", a.print_config, "Print the resolved config and exit");
}

/// Applies "a.b.c=value" to the JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw rt::ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw rt::ConfigError("--set " + key + ": '" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw rt::ConfigError("--set " + key + ": index " + part + " out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object() && !node->is_null()) throw rt::ConfigError("--set " + key + ": '" + part + "' is not an object");
      node = &(*node)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

int run_pipeline_cmd(const PipelineArgs& a) {
  json doc = rt::io::read_json(a.config);
  for (const auto& s : a.sets) apply_override(doc, s);
  auto cfg = rt::config::from_json(doc);
  // Global flags (or their environment variables) win over the file.
  if (*g.seed_opt) {
    cfg.clustering.seed = g.seed;
    for (auto& s : cfg.sources) {
      if (auto* h = std::get_if<rt::config::HopfSource>(&s)) h->seed = g.seed;
    }
  }
  if (*g.workers_opt) cfg.workers = g.workers;
  if (*g.out_dir_opt) cfg.output.dir = g.out_dir;
  if (a.print_config) {
    std::cout << rt::config::to_json(cfg).dump(2) << '\n';
    return 0;
  }
  const auto result = rt::pipeline::run_pipeline(cfg, g.quiet ? rt::io::Logger{} : rt::io::Logger{note});
  const auto& r = result.report;
  std::string counts;
  for (std::size_t l = 0; l < r.counts.size(); ++l) counts += (l ? ", " : "") + std::to_string(r.counts[l]);
  note(std::to_string(r.n_windows) + " windows tagged (" + counts + "), " + std::to_string(r.stable_transitions.size()) +
       " stable transitions; outputs in " + cfg.output.dir);
  return 0;
}

// ---- report ---------------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::size_t min_run = 2;
  std::string out;
};

void add_report(CLI::App& app, ReportArgs& a) {
  auto* sub = app.add_subcommand("report", "Summarize a tagged CSV: label counts, runs, transitions");
  sub->add_option("--input", a.input, "Tagged CSV")->required();
  sub->add_option("--min-run", a.min_run, "Runs shorter than this are ignored for stable transitions")->capture_default_str();
  sub->add_option("--out", a.out, "Write JSON here instead of stdout");
}

int run_report(const ReportArgs& a) {
  const auto report = rt::pipeline::to_json(rt::pipeline::tag_report(rt::io::read_tagged_csv(a.input), a.min_run));
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    rt::io::write_json(a.out, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tag dynamical regimes in time series by persistent homology of sliding windows"};
  app.set_version_flag("--version", rt::pipeline::kVersion);
  app.require_subcommand(1);
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed (clustering and stochastic sources)")
                   ->envname("REGIME_TAGGER_SEED");
  g.workers_opt = app.add_option("--workers", g.workers, "Worker threads, 0 = all cores")
                      ->envname("REGIME_TAGGER_WORKERS");
  g.out_dir_opt = app.add_option("--out-dir", g.out_dir, "Directory for outputs")->envname("REGIME_TAGGER_OUT_DIR");
  app.add_flag("-q,--quiet", g.quiet, "Suppress progress messages")->envname("REGIME_TAGGER_QUIET");
  app.fallthrough();

  SimulateArgs simulate;
  EmbedArgs embed;
  PersistArgs persist;
  FeaturizeArgs featurize;
  TagArgs tag;
  PipelineArgs pipeline;
  ReportArgs report;
  add_simulate(app, simulate);
  add_embed(app, embed);
  add_persist(app, persist);
  add_featurize(app, featurize);
  add_tag(app, tag);
  add_pipeline(app, pipeline);
  add_report(app, report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(rt::ExitCode::kConfig);
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "simulate") return run_simulate(simulate);
    if (cmd == "embed") return run_embed(embed);
    if (cmd == "persist") return run_persist(persist);
    if (cmd == "featurize") return run_featurize(featurize);
    if (cmd == "tag") return run_tag(tag);
    if (cmd == "pipeline") return run_pipeline_cmd(pipeline);
    return run_report(report);
  } catch (const rt::Error& e) {
    std::cerr << "regime_tagger: error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "regime_tagger: error: " << e.what() << '\n';
    return static_cast<int>(rt::ExitCode::kData);
  } catch (const std::exception& e) {
    std::cerr << "regime_tagger: internal error: " << e.what() << '\n';
    return 1;
  }
}
