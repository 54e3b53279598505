// Batch front end: ingest/describe/estimation subcommands bound to a flat
// JSON config with flag overrides. Every run writes manifest.json (effective
// config, seed, input digests) next to its report files; reruns from the same
// manifest are byte-identical.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paneval/bacon.hpp"
#include "paneval/did.hpp"
#include "paneval/panel.hpp"
#include "paneval/serialize.hpp"
#include "paneval/spatial.hpp"
#include "paneval/synth.hpp"

namespace fs = std::filesystem;
using namespace paneval;

namespace {

struct SimConfig {
  int entities = 100;
  int years = 12;
  int first_year = 2000;
  double delta = 0.0;
  std::string cohorts;  // "2005:0.2,2010:0.2"
  double entity_fe_sd = 1.0;
  double year_fe_sd = 1.0;
  double noise_sd = 1.0;
  double pre_trend = 0.0;
  double serial_corr = 0.0;
  double rho = 0.0;
  std::string grid;  // "rows,cols" rook-adjacency graph for spatial runs
};

struct RunConfig {
  std::string panel, schedule, centroids, zones, adjacency;
  std::string outcome;
  std::vector<std::string> controls;
  std::string cluster;
  int lag = 1;
  int drop_before = 0;  // 0 = keep everything
  std::vector<int> window{-4, 4};
  int reps = 500;
  std::uint64_t seed = 1;
  std::string mode = "permute-both";
  std::string moderator;
  double ring_d = 10.0;
  int rings = 0;  // 0 = auto: round(40 / ring_d)
  std::string out = "out";
  int threads = 1;
  SimConfig sim;
};

json config_to_json(const RunConfig& c) {
  json sim{{"entities", c.sim.entities},
           {"years", c.sim.years},
           {"first_year", c.sim.first_year},
           {"delta", c.sim.delta},
           {"cohorts", c.sim.cohorts},
           {"entity_fe_sd", c.sim.entity_fe_sd},
           {"year_fe_sd", c.sim.year_fe_sd},
           {"noise_sd", c.sim.noise_sd},
           {"pre_trend", c.sim.pre_trend},
           {"serial_corr", c.sim.serial_corr},
           {"rho", c.sim.rho},
           {"grid", c.sim.grid}};
  // threads is an execution detail, deliberately not part of the manifest
  return json{{"panel", c.panel},
              {"schedule", c.schedule},
              {"centroids", c.centroids},
              {"zones", c.zones},
              {"adjacency", c.adjacency},
              {"outcome", c.outcome},
              {"controls", c.controls},
              {"cluster", c.cluster},
              {"lag", c.lag},
              {"drop_before", c.drop_before},
              {"window", c.window},
              {"reps", c.reps},
              {"seed", c.seed},
              {"mode", c.mode},
              {"moderator", c.moderator},
              {"ring_d", c.ring_d},
              {"rings", c.rings},
              {"out", c.out},
              {"sim", sim}};
}

void config_from_json(const json& j, RunConfig& c) {
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key) && !j[key].is_null()) target = j[key].get<std::decay_t<decltype(target)>>();
  };
  get("panel", c.panel);
  get("schedule", c.schedule);
  get("centroids", c.centroids);
  get("zones", c.zones);
  get("adjacency", c.adjacency);
  get("outcome", c.outcome);
  get("controls", c.controls);
  get("cluster", c.cluster);
  get("lag", c.lag);
  get("drop_before", c.drop_before);
  get("window", c.window);
  get("reps", c.reps);
  get("seed", c.seed);
  get("mode", c.mode);
  get("moderator", c.moderator);
  get("ring_d", c.ring_d);
  get("rings", c.rings);
  get("out", c.out);
  get("threads", c.threads);
  if (j.contains("sim")) {
    const json& s = j["sim"];
    auto gets = [&](const char* key, auto& target) {
      if (s.contains(key) && !s[key].is_null()) target = s[key].get<std::decay_t<decltype(target)>>();
    };
    gets("entities", c.sim.entities);
    gets("years", c.sim.years);
    gets("first_year", c.sim.first_year);
    gets("delta", c.sim.delta);
    gets("cohorts", c.sim.cohorts);
    gets("entity_fe_sd", c.sim.entity_fe_sd);
    gets("year_fe_sd", c.sim.year_fe_sd);
    gets("noise_sd", c.sim.noise_sd);
    gets("pre_trend", c.sim.pre_trend);
    gets("serial_corr", c.sim.serial_corr);
    gets("rho", c.sim.rho);
    gets("grid", c.sim.grid);
  }
}

std::map<int, double> parse_cohorts(const std::string& text) {
  std::map<int, double> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
    std::size_t colon = item.find(':');
    require(colon != std::string::npos, ErrorCode::InvalidSpec,
            "cohort item '" + item + "' must look like YEAR:FRACTION");
    out[static_cast<int>(parse_integer(item.substr(0, colon), 0, "cohort year"))] =
        parse_number(item.substr(colon + 1), 0, "cohort fraction");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct OutputSet {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>> files;  // name -> content

  void add(const std::string& name, const std::string& content) {
    files.emplace_back(name, content);
  }
  void add_json(const std::string& name, const json& j) { add(name, j.dump(2) + "\n"); }

  void flush() const {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) write_file((dir / name).string(), content);
  }
};

struct Inputs {
  PanelDataset panel;
  TreatmentSchedule schedule;
  bool has_schedule = false;
  json digests = json::object();
};

Inputs load_inputs(const RunConfig& cfg, bool need_panel, bool need_schedule) {
  Inputs in;
  if (need_panel) {
    require(!cfg.panel.empty(), ErrorCode::InvalidSpec, "--panel is required");
    require(fs::exists(cfg.panel), ErrorCode::InvalidSpec, "panel file not found: " + cfg.panel);
    in.panel = load_panel(cfg.panel);
    in.digests["panel"] = {{"path", cfg.panel}, {"digest", file_digest(cfg.panel)}};
    require(cfg.outcome.empty() || in.panel.has_column(cfg.outcome), ErrorCode::UnknownVariable,
            "outcome column '" + cfg.outcome + "' not in the panel");
    for (const auto& c : cfg.controls)
      require(in.panel.has_column(c), ErrorCode::UnknownVariable,
              "control column '" + c + "' not in the panel");
  }
  if (need_schedule) {
    require(!cfg.schedule.empty(), ErrorCode::InvalidSpec, "--schedule is required");
    require(fs::exists(cfg.schedule), ErrorCode::InvalidSpec,
            "schedule file not found: " + cfg.schedule);
    in.schedule = load_schedule(cfg.schedule);
    in.has_schedule = true;
    in.digests["schedule"] = {{"path", cfg.schedule}, {"digest", file_digest(cfg.schedule)}};
  }
  return in;
}

json manifest_json(const std::string& command, const RunConfig& cfg, const json& digests) {
  return json{{"command", command},
              {"config", config_to_json(cfg)},
              {"seed", cfg.seed},
              {"inputs", digests}};
}

std::optional<int> drop_before_opt(const RunConfig& cfg) {
  if (cfg.drop_before == 0) return std::nullopt;
  return cfg.drop_before;
}

int run_ingest(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, !cfg.schedule.empty());
  json vars = json::object();
  for (const auto& name : in.panel.column_names) {
    const Matd& col = in.panel.columns.at(name);
    long miss = 0;
    for (Index i = 0; i < col.rows(); ++i)
      for (Index j = 0; j < col.cols(); ++j)
        if (is_missing(col(i, j))) ++miss;
    vars[name] = {{"missing", miss}};
  }
  json report{{"entities", in.panel.entities.size()},
              {"years", {in.panel.first_year, in.panel.last_year}},
              {"variables", vars}};
  if (in.has_schedule) {
    report["schedule"] = {{"treated_entities", in.schedule.first_event_year.size()}};
  }
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("ingest", cfg, in.digests));
  out.add_json("ingest.json", report);
  out.flush();
  return 0;
}

int run_describe(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, false);
  auto stats = describe(in.panel);
  json rows = json::array();
  for (const auto& s : stats) {
    json r{{"variable", s.name}, {"n", s.n}};
    r["mean"] = std::isnan(s.mean) ? json(nullptr) : json(s.mean);
    r["sd"] = std::isnan(s.sd) ? json(nullptr) : json(s.sd);
    r["min"] = std::isnan(s.min) ? json(nullptr) : json(s.min);
    r["max"] = std::isnan(s.max) ? json(nullptr) : json(s.max);
    rows.push_back(r);
  }
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("describe", cfg, in.digests));
  out.add_json("describe.json", rows);
  out.add("describe.csv", describe_to_csv(stats));
  out.flush();
  return 0;
}

int run_did(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  FitResult fit = att_estimate(setup.ds, setup.treatment, cfg.outcome, cfg.controls, cfg.cluster);
  json j = fit_to_json(fit);
  j["excluded_entities"] = setup.excluded;
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("did", cfg, in.digests));
  out.add_json("did.json", j);
  out.flush();
  return 0;
}

int run_event_study(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  require(cfg.window.size() == 2, ErrorCode::InvalidSpec, "--window needs two values a,b");
  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  EventStudyResult res = event_study(setup.ds, in.schedule, cfg.outcome, cfg.controls,
                                     {cfg.window[0], cfg.window[1]}, cfg.cluster, cfg.lag);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("event-study", cfg, in.digests));
  out.add_json("event-study.json", event_study_to_json(res));
  out.add("event-study.csv", event_study_to_csv(res));
  out.flush();
  return 0;
}

int run_bacon(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  BaconResult res = bacon_decompose(in.panel, in.schedule, cfg.outcome, cfg.lag, cfg.controls);
  BadControlReport report = flag_bad_controls(res);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("bacon", cfg, in.digests));
  out.add_json("bacon.json", bacon_to_json(res, report));
  out.add("bacon_comparisons.csv", bacon_comparisons_to_csv(res));
  out.add("bacon_categories.csv", bacon_categories_to_csv(res));
  out.flush();
  return 0;
}

int run_placebo(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  TreatmentSchedule sub_schedule;  // restrict to surviving entities
  for (const auto& e : setup.ds.entities) {
    auto ev = in.schedule.event_year(e);
    if (ev) {
      sub_schedule.first_event_year[e] = *ev;
      sub_schedule.all_event_years[e] = in.schedule.all_event_years.at(e);
    }
  }
  PlaceboResult res = placebo(setup.ds, sub_schedule, cfg.outcome, cfg.controls, cfg.reps,
                              cfg.seed, placebo_mode_from(cfg.mode), cfg.lag, cfg.threads);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("placebo", cfg, in.digests));
  out.add_json("placebo.json", placebo_to_json(res));
  out.add("placebo.csv", placebo_to_csv(res));
  out.flush();
  return 0;
}

int run_logit_check(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  PanelDataset with_d = with_treatment_column(setup.ds, setup.treatment);
  std::vector<std::string> predictors{cfg.outcome};
  predictors.insert(predictors.end(), cfg.controls.begin(), cfg.controls.end());
  FitResult fit = selection_test(with_d, kTreatmentName, predictors);
  json j = fit_to_json(fit);
  j["excluded_entities"] = setup.excluded;
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("logit-check", cfg, in.digests));
  out.add_json("logit-check.json", j);
  out.flush();
  return 0;
}

int run_moderate(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  require(!cfg.moderator.empty(), ErrorCode::InvalidSpec, "--moderator is required");
  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  ModerationSpec mspec{cfg.moderator, false};
  FitResult fit =
      moderation_fit(setup.ds, setup.treatment, cfg.outcome, mspec, cfg.controls, cfg.cluster);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("moderate", cfg, in.digests));
  out.add_json("moderate.json", fit_to_json(fit));
  out.flush();
  return 0;
}

int run_sdm(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  require(!cfg.adjacency.empty(), ErrorCode::InvalidSpec, "--adjacency is required");
  require(fs::exists(cfg.adjacency), ErrorCode::InvalidSpec,
          "adjacency file not found: " + cfg.adjacency);
  in.digests["adjacency"] = {{"path", cfg.adjacency}, {"digest", file_digest(cfg.adjacency)}};

  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  // The spatial lag needs complete series: interpolate, then clamp imputed
  // negatives to zero. Leading/trailing gaps still abort inside sdm_fit.
  PanelDataset ds = setup.ds;
  for (const auto& var : [&] {
         std::vector<std::string> v{cfg.outcome};
         v.insert(v.end(), cfg.controls.begin(), cfg.controls.end());
         return v;
       }()) {
    ds = interpolate_missing(ds, var);
    ds = clamp_negative_to_zero(ds, var);
  }

  auto pairs = load_adjacency_pairs(cfg.adjacency);
  std::vector<std::pair<std::string, std::string>> kept_pairs;
  for (const auto& p : pairs)
    if (ds.entity_index(p.first) && ds.entity_index(p.second)) kept_pairs.push_back(p);
  SpatialWeights W = row_normalize(build_weights_adjacency(ds.entities, kept_pairs));

  SdmSpec spec;
  spec.outcome = cfg.outcome;
  spec.controls = cfg.controls;
  SdmFit fit = sdm_fit(ds, W, setup.treatment, spec);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("sdm", cfg, in.digests));
  out.add_json("sdm.json", sdm_to_json(fit));
  out.flush();
  return 0;
}

int run_ring(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true, true);
  require(!cfg.outcome.empty(), ErrorCode::InvalidSpec, "--outcome is required");
  require(!cfg.centroids.empty() && !cfg.zones.empty(), ErrorCode::InvalidSpec,
          "--centroids and --zones are required");
  require(fs::exists(cfg.centroids), ErrorCode::InvalidSpec,
          "centroids file not found: " + cfg.centroids);
  require(fs::exists(cfg.zones), ErrorCode::InvalidSpec, "zones file not found: " + cfg.zones);
  in.digests["centroids"] = {{"path", cfg.centroids}, {"digest", file_digest(cfg.centroids)}};
  in.digests["zones"] = {{"path", cfg.zones}, {"digest", file_digest(cfg.zones)}};

  DidSetup setup = prepare_did(in.panel, in.schedule, cfg.lag, drop_before_opt(cfg));
  auto centroid_rows = load_centroids(cfg.centroids);
  std::map<std::string, GeoPoint> lookup(centroid_rows.begin(), centroid_rows.end());
  std::vector<GeoPoint> centroids;
  for (const auto& e : setup.ds.entities) {
    auto it = lookup.find(e);
    require(it != lookup.end(), ErrorCode::UnknownEntity, "no centroid for entity '" + e + "'");
    centroids.push_back(it->second);
  }
  auto zones = load_zones(cfg.zones);
  int m = cfg.rings > 0 ? cfg.rings
                        : std::max(1, static_cast<int>(std::llround(40.0 / cfg.ring_d)));
  RingPanel rings = ring_dummies(setup.ds.entities, centroids, zones, setup.ds.first_year,
                                 setup.ds.last_year, cfg.ring_d, m, cfg.lag);
  FitResult fit =
      ring_regression(setup.ds, setup.treatment, rings, cfg.outcome, cfg.controls, cfg.cluster);
  OutputSet out{fs::path(cfg.out), {}};
  out.add_json("manifest.json", manifest_json("ring", cfg, in.digests));
  out.add_json("ring.json", fit_to_json(fit));
  out.add("ring.csv", ring_to_csv(fit, m));
  out.flush();
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  DgpSpec spec;
  spec.n_entities = cfg.sim.entities;
  spec.n_years = cfg.sim.years;
  spec.first_year = cfg.sim.first_year;
  spec.delta = cfg.sim.delta;
  spec.cohort_fractions = parse_cohorts(cfg.sim.cohorts);
  spec.entity_fe_sd = cfg.sim.entity_fe_sd;
  spec.year_fe_sd = cfg.sim.year_fe_sd;
  spec.noise_sd = cfg.sim.noise_sd;
  spec.pre_trend = cfg.sim.pre_trend;
  spec.serial_corr = cfg.sim.serial_corr;
  spec.rho = cfg.sim.rho;
  spec.lag = cfg.lag;
  spec.seed = cfg.seed;

  OutputSet out{fs::path(cfg.out), {}};
  bool spatial = !cfg.sim.grid.empty() || cfg.sim.rho != 0.0;
  if (spatial) {
    int rows = 0, cols = 0;
    if (!cfg.sim.grid.empty()) {
      auto comma = cfg.sim.grid.find(',');
      require(comma != std::string::npos, ErrorCode::InvalidSpec,
              "--grid must look like ROWS,COLS");
      rows = static_cast<int>(parse_integer(cfg.sim.grid.substr(0, comma), 0, "grid rows"));
      cols = static_cast<int>(parse_integer(cfg.sim.grid.substr(comma + 1), 0, "grid cols"));
    } else {
      cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_entities))));
      rows = (spec.n_entities + cols - 1) / cols;
    }
    require(rows * cols == spec.n_entities, ErrorCode::InvalidSpec,
            "grid rows*cols must equal the entity count");

    std::vector<std::string> names = synthetic_entity_names(spec.n_entities);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        int i = r * cols + c;
        if (c + 1 < cols) pairs.emplace_back(names[static_cast<std::size_t>(i)],
                                             names[static_cast<std::size_t>(i + 1)]);
        if (r + 1 < rows) pairs.emplace_back(names[static_cast<std::size_t>(i)],
                                             names[static_cast<std::size_t>(i + cols)]);
      }
    SpatialWeights W = row_normalize(build_weights_adjacency(names, pairs));
    SimulatedPanel sim = simulate_sdm(spec, W);
    out.add("panel.csv", panel_to_csv(sim.ds));
    out.add("schedule.csv", schedule_to_csv(sim.schedule()));
    out.add("adjacency.csv", adjacency_to_csv(pairs));
    json j{{"entities", spec.n_entities}, {"years", spec.n_years}, {"warnings", sim.warnings}};
    out.add_json("simulate.json", j);
  } else {
    SimulatedPanel sim = simulate_did(spec);
    out.add("panel.csv", panel_to_csv(sim.ds));
    out.add("schedule.csv", schedule_to_csv(sim.schedule()));
    json j{{"entities", spec.n_entities}, {"years", spec.n_years}, {"warnings", sim.warnings}};
    out.add_json("simulate.json", j);
  }
  out.add_json("manifest.json", manifest_json("simulate", cfg, json::object()));
  out.flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staggered difference-in-differences policy evaluation engine"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::string controls_csv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat JSON config (flags win)");
    sub->add_option("--panel", cfg.panel, "panel CSV: entity,year,<vars...>");
    sub->add_option("--schedule", cfg.schedule, "schedule CSV: entity,event_year");
    sub->add_option("--centroids", cfg.centroids, "centroids CSV: entity,lon,lat");
    sub->add_option("--zones", cfg.zones, "zones CSV: lon,lat,year");
    sub->add_option("--adjacency", cfg.adjacency, "adjacency CSV: entity_a,entity_b");
    sub->add_option("--outcome", cfg.outcome, "outcome column");
    sub->add_option("--controls", controls_csv, "comma-separated control columns");
    sub->add_option("--cluster", cfg.cluster, "cluster: entity, meta attribute, or column");
    sub->add_option("--lag", cfg.lag, "years between event and effect onset");
    sub->add_option("--drop-before", cfg.drop_before, "exclude entities treated before YEAR");
    sub->add_option("--window", cfg.window, "event-study window a,b")->delimiter(',')->expected(2);
    sub->add_option("--reps", cfg.reps, "placebo repetitions");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--mode", cfg.mode, "placebo mode: permute-entities|permute-years|permute-both");
    sub->add_option("--moderator", cfg.moderator, "moderator column");
    sub->add_option("--ring-d", cfg.ring_d, "ring width in km");
    sub->add_option("--rings", cfg.rings, "ring count (default 40km / ring width)");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--threads", cfg.threads, "worker threads (output-invariant)");
    // simulate parameters
    sub->add_option("--entities", cfg.sim.entities, "simulated entities");
    sub->add_option("--years", cfg.sim.years, "simulated years");
    sub->add_option("--first-year", cfg.sim.first_year, "first simulated year");
    sub->add_option("--delta", cfg.sim.delta, "true treatment effect");
    sub->add_option("--cohorts", cfg.sim.cohorts, "cohort fractions YEAR:FRAC,...");
    sub->add_option("--entity-fe-sd", cfg.sim.entity_fe_sd, "entity effect sd");
    sub->add_option("--year-fe-sd", cfg.sim.year_fe_sd, "year effect sd");
    sub->add_option("--noise-sd", cfg.sim.noise_sd, "noise sd");
    sub->add_option("--pre-trend", cfg.sim.pre_trend, "pre-trend slope on treated entities");
    sub->add_option("--serial-corr", cfg.sim.serial_corr, "AR(1) noise within entities");
    sub->add_option("--rho", cfg.sim.rho, "spatial autocorrelation");
    sub->add_option("--grid", cfg.sim.grid, "adjacency grid ROWS,COLS");
    return sub;
  };

  add_common(app.add_subcommand("ingest", "validate input files"));
  add_common(app.add_subcommand("describe", "descriptive statistics"));
  add_common(app.add_subcommand("did", "baseline staggered DiD estimate"));
  add_common(app.add_subcommand("event-study", "parallel-trend event study"));
  add_common(app.add_subcommand("bacon", "Goodman-Bacon decomposition"));
  add_common(app.add_subcommand("placebo", "permutation placebo test"));
  add_common(app.add_subcommand("sdm", "spatial Durbin model"));
  add_common(app.add_subcommand("ring", "ring-distance spillover regression"));
  add_common(app.add_subcommand("logit-check", "treatment selection diagnostic"));
  add_common(app.add_subcommand("moderate", "moderation (interaction) model"));
  add_common(app.add_subcommand("simulate", "write a synthetic dataset"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  CLI::App* active = app.get_subcommands().front();
  const std::string command = active->get_name();

  try {
    if (!config_path.empty()) {
      require(fs::exists(config_path), ErrorCode::InvalidSpec,
              "config file not found: " + config_path);
      std::ifstream in(config_path);
      json j = json::parse(in);
      if (j.contains("config")) j = j["config"];  // accept a manifest directly
      RunConfig merged;
      config_from_json(j, merged);
      // Flags win over the file: keep cfg's value wherever the flag was set.
      auto set = [&](const char* name) { return active->count(name) > 0; };
      if (!set("--panel")) cfg.panel = merged.panel;
      if (!set("--schedule")) cfg.schedule = merged.schedule;
      if (!set("--centroids")) cfg.centroids = merged.centroids;
      if (!set("--zones")) cfg.zones = merged.zones;
      if (!set("--adjacency")) cfg.adjacency = merged.adjacency;
      if (!set("--outcome")) cfg.outcome = merged.outcome;
      if (!set("--controls")) cfg.controls = merged.controls;
      if (!set("--cluster")) cfg.cluster = merged.cluster;
      if (!set("--lag")) cfg.lag = merged.lag;
      if (!set("--drop-before")) cfg.drop_before = merged.drop_before;
      if (!set("--window")) cfg.window = merged.window;
      if (!set("--reps")) cfg.reps = merged.reps;
      if (!set("--seed")) cfg.seed = merged.seed;
      if (!set("--mode")) cfg.mode = merged.mode;
      if (!set("--moderator")) cfg.moderator = merged.moderator;
      if (!set("--ring-d")) cfg.ring_d = merged.ring_d;
      if (!set("--rings")) cfg.rings = merged.rings;
      if (!set("--out")) cfg.out = merged.out;
      if (!set("--threads")) cfg.threads = merged.threads;
      if (!set("--entities")) cfg.sim.entities = merged.sim.entities;
      if (!set("--years")) cfg.sim.years = merged.sim.years;
      if (!set("--first-year")) cfg.sim.first_year = merged.sim.first_year;
      if (!set("--delta")) cfg.sim.delta = merged.sim.delta;
      if (!set("--cohorts")) cfg.sim.cohorts = merged.sim.cohorts;
      if (!set("--entity-fe-sd")) cfg.sim.entity_fe_sd = merged.sim.entity_fe_sd;
      if (!set("--year-fe-sd")) cfg.sim.year_fe_sd = merged.sim.year_fe_sd;
      if (!set("--noise-sd")) cfg.sim.noise_sd = merged.sim.noise_sd;
      if (!set("--pre-trend")) cfg.sim.pre_trend = merged.sim.pre_trend;
      if (!set("--serial-corr")) cfg.sim.serial_corr = merged.sim.serial_corr;
      if (!set("--rho")) cfg.sim.rho = merged.sim.rho;
      if (!set("--grid")) cfg.sim.grid = merged.sim.grid;
    }
    if (!controls_csv.empty()) {
      cfg.controls.clear();
      std::size_t pos = 0;
      while (pos <= controls_csv.size()) {
        std::size_t comma = controls_csv.find(',', pos);
        std::string item = controls_csv.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) cfg.controls.push_back(item);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }

    if (command == "ingest") return run_ingest(cfg);
    if (command == "describe") return run_describe(cfg);
    if (command == "did") return run_did(cfg);
    if (command == "event-study") return run_event_study(cfg);
    if (command == "bacon") return run_bacon(cfg);
    if (command == "placebo") return run_placebo(cfg);
    if (command == "sdm") return run_sdm(cfg);
    if (command == "ring") return run_ring(cfg);
    if (command == "logit-check") return run_logit_check(cfg);
    if (command == "moderate") return run_moderate(cfg);
    if (command == "simulate") return run_simulate(cfg);
    std::cerr << "error: unknown command '" << command << "'\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
