#include "cdrpm/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <omp.h>

#include "cdrpm/conformance.hpp"
#include "cdrpm/discovery.hpp"
#include "cdrpm/error.hpp"
#include "cdrpm/event_log.hpp"
#include "cdrpm/validation.hpp"

namespace cdrpm {

namespace fs = std::filesystem;

std::string_view to_string(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "info";
}

LogLevel parse_log_level(std::string_view text) {
  for (auto l : {LogLevel::error, LogLevel::warn, LogLevel::info, LogLevel::debug}) {
    if (to_string(l) == text) return l;
  }
  throw Error(Errc::invalid_config, "log level must be error, warn, info or debug, got '" + std::string(text) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::synth: return "synth";
    case Stage::position: return "position";
    case Stage::stays: return "stays";
    case Stage::trips: return "trips";
    case Stage::log: return "log";
    case Stage::discover: return "discover";
    case Stage::conform: return "conform";
    case Stage::validate: return "validate";
  }
  return "?";
}

namespace {

std::atomic<int> g_log_level{static_cast<int>(LogLevel::info)};

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(Errc::invalid_config, "config [" + key.substr(0, key.find('.')) + "] " + key.substr(key.find('.') + 1) +
                                        ": " + why);
}

template <class F>
void guarded(const std::string& key, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_config && std::string_view(e.what()).starts_with("config [")) throw;
    bad(key, e.what());
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::int64_t n = 0;
  guarded(key, [&] { n = parse_int(v); });
  if (n < 0) bad(key, "must be non-negative");
  return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
  double d = 0.0;
  guarded(key, [&] { d = parse_double(v); });
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

fs::path to_path(const std::string& v, const fs::path& base) {
  const fs::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

// "walk:0.15,bus:0.35"
std::map<Mode, double> to_mode_mix(const std::string& key, const std::string& v) {
  std::map<Mode, double> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad(key, "expected mode:probability pairs, got '" + item + "'");
    Mode m = Mode::unknown;
    guarded(key, [&] { m = parse_mode(item.substr(0, colon)); });
    out[m] = to_real(key, item.substr(colon + 1));
  }
  return out;
}

// "15:27"
SpeedBand to_band(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) bad(key, "expected lo:hi in km/h, got '" + v + "'");
  return {to_real(key, v.substr(0, colon)), to_real(key, v.substr(colon + 1))};
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const fs::path&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto count = [&](const std::string& k, auto member) {
      t[k] = [k, member](PipelineConfig& c, const std::string& v, const fs::path&) { member(c) = to_count(k, v); };
    };
    auto real = [&](const std::string& k, auto member) {
      t[k] = [k, member](PipelineConfig& c, const std::string& v, const fs::path&) { member(c) = to_real(k, v); };
    };
    auto secs = [&](const std::string& k, auto member) {
      t[k] = [k, member](PipelineConfig& c, const std::string& v, const fs::path&) {
        member(c) = static_cast<Timestamp>(to_count(k, v));
      };
    };
    auto path = [&](const std::string& k, auto member) {
      t[k] = [member](PipelineConfig& c, const std::string& v, const fs::path& base) { member(c) = to_path(v, base); };
    };
    path("paths.cdr", [](PipelineConfig& c) -> auto& { return c.cdr; });
    path("paths.towers", [](PipelineConfig& c) -> auto& { return c.towers; });
    path("paths.regions", [](PipelineConfig& c) -> auto& { return c.regions; });
    path("paths.survey", [](PipelineConfig& c) -> auto& { return c.survey; });
    path("paths.aliases", [](PipelineConfig& c) -> auto& { return c.aliases; });
    path("paths.out", [](PipelineConfig& c) -> auto& { return c.out; });

    real("stays.r1_m", [](PipelineConfig& c) -> auto& { return c.stops.r1_m; });
    real("stays.r2_m", [](PipelineConfig& c) -> auto& { return c.stops.r2_m; });
    secs("stays.min_duration_s", [](PipelineConfig& c) -> auto& { return c.stops.min_duration_s; });
    secs("stays.max_gap_s", [](PipelineConfig& c) -> auto& { return c.stops.max_gap_s; });

    secs("trips.gap_threshold_s", [](PipelineConfig& c) -> auto& { return c.gap_threshold_s; });

    real("modes.walk_max_kmh", [](PipelineConfig& c) -> auto& { return c.modes.walk_max_kmh; });
    real("modes.bicycle_max_kmh", [](PipelineConfig& c) -> auto& { return c.modes.bicycle_max_kmh; });
    real("modes.bus_max_kmh", [](PipelineConfig& c) -> auto& { return c.modes.bus_max_kmh; });
    real("modes.bus_short_max_kmh", [](PipelineConfig& c) -> auto& { return c.modes.bus_short_max_kmh; });
    real("modes.bus_short_length_m", [](PipelineConfig& c) -> auto& { return c.modes.bus_short_length_m; });
    real("modes.car_max_kmh", [](PipelineConfig& c) -> auto& { return c.modes.car_max_kmh; });
    real("modes.train_long_min_kmh", [](PipelineConfig& c) -> auto& { return c.modes.train_long_min_kmh; });
    real("modes.train_long_length_m", [](PipelineConfig& c) -> auto& { return c.modes.train_long_length_m; });
    secs("modes.min_duration_s", [](PipelineConfig& c) -> auto& { return c.modes.min_duration_s; });

    t["log.level"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      guarded("log.level", [&] { c.level = parse_region_level(v); });
    };
    t["log.ocel"] = [](PipelineConfig& c, const std::string& v, const fs::path&) { c.ocel = to_bool("log.ocel", v); };

    count("discover.top_k", [](PipelineConfig& c) -> auto& { return c.top_k; });
    count("discover.min_arc_frequency", [](PipelineConfig& c) -> auto& { return c.min_arc_frequency; });

    t["validate.origin"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      c.survey_origin = v.empty() ? std::nullopt : std::optional<std::string>(v);
    };

    count("synth.n_agents", [](PipelineConfig& c) -> auto& { return c.synth.n_agents; });
    count("synth.n_days", [](PipelineConfig& c) -> auto& { return c.synth.n_days; });
    t["synth.epoch"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      guarded("synth.epoch", [&] { c.synth.epoch = parse_iso8601(v); });
    };
    t["synth.seed"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      try {
        std::size_t used = 0;
        c.synth.seed = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        bad("synth.seed", "expected an unsigned 64-bit integer, got '" + v + "'");
      }
    };
    count("synth.tower_rows", [](PipelineConfig& c) -> auto& { return c.synth.tower_rows; });
    count("synth.tower_cols", [](PipelineConfig& c) -> auto& { return c.synth.tower_cols; });
    real("synth.tower_spacing_m", [](PipelineConfig& c) -> auto& { return c.synth.tower_spacing_m; });
    real("synth.sector_radius_m", [](PipelineConfig& c) -> auto& { return c.synth.sector_radius_m; });
    count("synth.sectors_per_tower", [](PipelineConfig& c) -> auto& { return c.synth.sectors_per_tower; });
    real("synth.origin_lat", [](PipelineConfig& c) -> auto& { return c.synth.origin.lat; });
    real("synth.origin_lon", [](PipelineConfig& c) -> auto& { return c.synth.origin.lon; });
    count("synth.parish_towers", [](PipelineConfig& c) -> auto& { return c.synth.parish_towers; });
    count("synth.municipality_parishes", [](PipelineConfig& c) -> auto& { return c.synth.municipality_parishes; });
    count("synth.trips_per_day_min", [](PipelineConfig& c) -> auto& { return c.synth.trips_per_day_min; });
    count("synth.trips_per_day_max", [](PipelineConfig& c) -> auto& { return c.synth.trips_per_day_max; });
    count("synth.other_anchors", [](PipelineConfig& c) -> auto& { return c.synth.other_anchors; });
    real("synth.min_anchor_separation_m", [](PipelineConfig& c) -> auto& { return c.synth.min_anchor_separation_m; });
    secs("synth.day_start_s", [](PipelineConfig& c) -> auto& { return c.synth.day_start_s; });
    secs("synth.day_start_jitter_s", [](PipelineConfig& c) -> auto& { return c.synth.day_start_jitter_s; });
    secs("synth.min_dwell_s", [](PipelineConfig& c) -> auto& { return c.synth.min_dwell_s; });
    secs("synth.dwell_jitter_s", [](PipelineConfig& c) -> auto& { return c.synth.dwell_jitter_s; });
    real("synth.transfer_prob", [](PipelineConfig& c) -> auto& { return c.synth.transfer_prob; });
    secs("synth.transfer_dwell_s", [](PipelineConfig& c) -> auto& { return c.synth.transfer_dwell_s; });
    real("synth.min_transfer_leg_m", [](PipelineConfig& c) -> auto& { return c.synth.min_transfer_leg_m; });
    t["synth.mode_mix"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      c.synth.mode_mix = to_mode_mix("synth.mode_mix", v);
    };
    for (Mode m : kTravelModes) {
      const std::string k = "synth.speed_" + std::string(to_string(m));
      t[k] = [k, m](PipelineConfig& c, const std::string& v, const fs::path&) { c.synth.speed_bands[m] = to_band(k, v); };
    }
    real("synth.speed_jitter", [](PipelineConfig& c) -> auto& { return c.synth.speed_jitter; });
    real("synth.dwell_pings_per_hour", [](PipelineConfig& c) -> auto& { return c.synth.dwell_pings_per_hour; });
    real("synth.moving_pings_per_hour", [](PipelineConfig& c) -> auto& { return c.synth.moving_pings_per_hour; });
    real("synth.noise", [](PipelineConfig& c) -> auto& { return c.synth.noise; });

    t["run.log_level"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      guarded("run.log_level", [&] { c.log_level = parse_log_level(v); });
    };
    t["run.threads"] = [](PipelineConfig& c, const std::string& v, const fs::path&) {
      c.threads = static_cast<int>(to_count("run.threads", v));
    };
    return t;
  }();
  return table;
}

std::string g(double v) { return format_double(v); }

}  // namespace

void PipelineConfig::validate() const {
  guarded("stays.r1_m", [&] { stops.validate(); });
  if (gap_threshold_s <= 0) bad("trips.gap_threshold_s", "must be positive");
  guarded("modes.walk_max_kmh", [&] { modes.validate(); });
  if (threads < 0) bad("run.threads", "must be non-negative");
  try {
    synth.validate();
  } catch (const Error& e) {
    std::string what = e.what();
    const auto dot = what.find('.');
    const auto colon = what.find(": ");
    if (what.starts_with("synth.") && colon != std::string::npos) {
      bad("synth." + what.substr(dot + 1, colon - dot - 1), what.substr(colon + 2));
    }
    throw;
  }
}

std::string PipelineConfig::canonical() const {
  std::ostringstream o;
  auto opt = [&](const char* k, const std::optional<fs::path>& p) {
    if (p) o << k << " = " << p->string() << "\n";
  };
  o << "[paths]\n";
  opt("cdr", cdr);
  opt("towers", towers);
  opt("regions", regions);
  opt("survey", survey);
  opt("aliases", aliases);
  o << "\n[stays]\nr1_m = " << g(stops.r1_m) << "\nr2_m = " << g(stops.r2_m)
    << "\nmin_duration_s = " << stops.min_duration_s << "\nmax_gap_s = " << stops.max_gap_s << "\n";
  o << "\n[trips]\ngap_threshold_s = " << gap_threshold_s << "\n";
  o << "\n[modes]\nwalk_max_kmh = " << g(modes.walk_max_kmh) << "\nbicycle_max_kmh = " << g(modes.bicycle_max_kmh)
    << "\nbus_max_kmh = " << g(modes.bus_max_kmh) << "\nbus_short_max_kmh = " << g(modes.bus_short_max_kmh)
    << "\nbus_short_length_m = " << g(modes.bus_short_length_m) << "\ncar_max_kmh = " << g(modes.car_max_kmh)
    << "\ntrain_long_min_kmh = " << g(modes.train_long_min_kmh)
    << "\ntrain_long_length_m = " << g(modes.train_long_length_m) << "\nmin_duration_s = " << modes.min_duration_s
    << "\n";
  o << "\n[log]\nlevel = " << to_string(level) << "\nocel = " << (ocel ? "true" : "false") << "\n";
  o << "\n[discover]\ntop_k = " << top_k << "\nmin_arc_frequency = " << min_arc_frequency << "\n";
  o << "\n[validate]\norigin = " << survey_origin.value_or("") << "\n";
  const auto& s = synth;
  o << "\n[synth]\nn_agents = " << s.n_agents << "\nn_days = " << s.n_days << "\nepoch = " << format_iso8601(s.epoch)
    << "\nseed = " << s.seed << "\ntower_rows = " << s.tower_rows << "\ntower_cols = " << s.tower_cols
    << "\ntower_spacing_m = " << g(s.tower_spacing_m) << "\nsector_radius_m = " << g(s.sector_radius_m)
    << "\nsectors_per_tower = " << s.sectors_per_tower << "\norigin_lat = " << g(s.origin.lat)
    << "\norigin_lon = " << g(s.origin.lon) << "\nparish_towers = " << s.parish_towers
    << "\nmunicipality_parishes = " << s.municipality_parishes << "\ntrips_per_day_min = " << s.trips_per_day_min
    << "\ntrips_per_day_max = " << s.trips_per_day_max << "\nother_anchors = " << s.other_anchors
    << "\nmin_anchor_separation_m = " << g(s.min_anchor_separation_m) << "\nday_start_s = " << s.day_start_s
    << "\nday_start_jitter_s = " << s.day_start_jitter_s << "\nmin_dwell_s = " << s.min_dwell_s
    << "\ndwell_jitter_s = " << s.dwell_jitter_s << "\ntransfer_prob = " << g(s.transfer_prob)
    << "\ntransfer_dwell_s = " << s.transfer_dwell_s << "\nmin_transfer_leg_m = " << g(s.min_transfer_leg_m)
    << "\nmode_mix = ";
  bool first = true;
  for (const auto& [m, p] : s.mode_mix) {
    o << (first ? "" : ",") << to_string(m) << ":" << g(p);
    first = false;
  }
  o << "\n";
  for (const auto& [m, b] : s.speed_bands) o << "speed_" << to_string(m) << " = " << g(b.lo_kmh) << ":" << g(b.hi_kmh) << "\n";
  o << "speed_jitter = " << g(s.speed_jitter) << "\ndwell_pings_per_hour = " << g(s.dwell_pings_per_hour)
    << "\nmoving_pings_per_hour = " << g(s.moving_pings_per_hour) << "\nnoise = " << g(s.noise) << "\n";
  return o.str();
}

std::string PipelineConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(canonical())));
  return buf;
}

PipelineConfig parse_config(std::string_view ini, const fs::path& base_dir, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in{std::string(ini)};
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::invalid_config, source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig c;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error(Errc::invalid_config, source + ": key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw Error(Errc::invalid_config, source + ": unknown key [" + section + "] " + key);
      it->second(c, value.data(), base_dir);
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(e.code(), source + ": " + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::io_error, "config file " + path.string() + " does not exist");
  return parse_config(read_file(path), path.parent_path(), path.string());
}

std::string default_config_ini() {
  PipelineConfig c;
  std::string text = c.canonical();
  const auto pos = text.find("\n[stays]");
  text.insert(pos, "# cdr = cdr.csv\n# towers = towers.csv\n# regions = regions.geojson\n# survey = survey.csv\n"
                   "# aliases = aliases.csv\nout = run\n");
  text += "\n[run]\nlog_level = info\nthreads = 0\n";
  return text;
}

// ---------------------------------------------------------------------------
// Logging

void set_log_level(LogLevel level) { g_log_level = static_cast<int>(level); }

void log_message(LogLevel level, std::string_view stage, std::string_view message) {
  if (static_cast<int>(level) > g_log_level.load()) return;
  std::cerr << "[" << to_string(level) << "] " << stage << ": " << message << "\n";
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::string> stage_outputs(Stage stage, const PipelineConfig& config) {
  switch (stage) {
    case Stage::synth: return {"cdr.csv", "towers.csv", "regions.geojson", "ground_truth.json", "survey.csv"};
    case Stage::position: return {"positioned.csv"};
    case Stage::stays: return {"staypoints.csv"};
    case Stage::trips: return {"triplegs.csv", "trips.csv"};
    case Stage::log:
      if (config.ocel) return {"case_log.csv", "ocel.json", "log_stats.json", "dropped_trips.csv"};
      return {"case_log.csv", "log_stats.json", "dropped_trips.csv"};
    case Stage::discover:
      if (config.ocel) return {"dfg.json", "dfg.dot", "variants.csv", "ocdfg.json", "ocdfg.dot"};
      return {"dfg.json", "dfg.dot", "variants.csv"};
    case Stage::conform: return {"net.dot", "fitness.json", "fitness_traces.csv"};
    case Stage::validate:
      if (!config.cdr) return {"od_matrix.csv", "validation.json", "recovery.json"};
      return {"od_matrix.csv", "validation.json"};
  }
  return {};
}

namespace {

constexpr const char* kStampFile = "run.stamp";

class StageRun {
 public:
  StageRun(Stage stage, const PipelineConfig& config, const RunOptions& options)
      : stage_(stage), c_(config), o_(options), dir_(config.out) {}

  void operator()() {
    prepare();
    switch (stage_) {
      case Stage::synth: synth(); break;
      case Stage::position: position(); break;
      case Stage::stays: stays(); break;
      case Stage::trips: trips(); break;
      case Stage::log: log(); break;
      case Stage::discover: discover(); break;
      case Stage::conform: conform(); break;
      case Stage::validate: validate(); break;
    }
  }

 private:
  void info(const std::string& msg) const { log_message(LogLevel::info, to_string(stage_), msg); }

  void prepare() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(Errc::io_error, "cannot create run directory " + dir_.string() + ": " + ec.message());
    const fs::path stamp = dir_ / kStampFile;
    const std::string hash = c_.hash();
    if (fs::exists(stamp)) {
      const std::string text = read_file(stamp);
      const std::string have = text.substr(0, text.find('\n'));
      if (have != hash) {
        throw Error(Errc::invalid_config, "run directory " + dir_.string() + " was produced with config " + have +
                                              ", current config is " + hash + "; use a fresh --out directory");
      }
    } else {
      write_file(stamp, hash + "\n" + c_.canonical());
    }
    if (!o_.force) {
      for (const auto& name : stage_outputs(stage_, c_)) {
        if (fs::exists(dir_ / name)) {
          throw Error(Errc::invalid_config,
                      (dir_ / name).string() + " already exists; artifacts are write-once (pass --force to overwrite)");
        }
      }
    }
  }

  fs::path artifact(const std::string& name, Stage producer) const {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) {
      throw Error(Errc::dependency_missing,
                  p.string() + " not found; run `" + std::string(to_string(producer)) + "` first");
    }
    return p;
  }

  // A configured external file, or the synth artifact of the same role.
  fs::path input(const std::optional<fs::path>& configured, const char* field, const std::string& synth_name) const {
    if (configured) {
      if (!fs::exists(*configured)) {
        throw Error(Errc::io_error, std::string(field) + " file " + configured->string() + " does not exist");
      }
      return *configured;
    }
    const fs::path p = dir_ / synth_name;
    if (!fs::exists(p)) {
      throw Error(Errc::dependency_missing, p.string() + " not found; run `synth` first or set [paths] " + field);
    }
    return p;
  }

  void emit(const std::string& name, const std::string& content) const { write_file(dir_ / name, content); }

  std::vector<Region> regions() const { return read_regions(input(c_.regions, "regions", "regions.geojson")); }

  void synth() {
    const Scenario s = generate_scenario(c_.synth);
    emit("cdr.csv", write_cdr(s.events));
    emit("towers.csv", write_towers(s.towers));
    emit("regions.geojson", write_regions(s.regions));
    emit("ground_truth.json", write_ground_truth(s.truth));
    emit("survey.csv", write_survey_pairs(survey_from_truth(s.truth, s.regions, c_.synth.seed)));
    info(std::to_string(s.events.size()) + " events, " + std::to_string(s.truth.trip_count()) + " trips, " +
         std::to_string(s.truth.agents.size()) + " agents");
  }

  void position() {
    const auto events = read_cdr(input(c_.cdr, "cdr", "cdr.csv"));
    const auto towers = make_tower_table(read_towers(input(c_.towers, "towers", "towers.csv")));
    const auto land = regions();
    const auto positioned = position_events(events, towers, land);
    emit("positioned.csv", write_positioned(positioned));
    info(std::to_string(positioned.size()) + " events positioned");
  }

  void stays() {
    if (c_.stops.suspicious()) {
      log_message(LogLevel::warn, "stays", "r2_m is below r1_m; destinations may split");
    }
    const auto positioned = read_positioned(artifact("positioned.csv", Stage::position));
    const auto land = regions();
    const RegionIndex index(land);
    const auto sps = build_staypoints(positioned, c_.stops, index);
    emit("staypoints.csv", write_staypoints(sps));
    info(std::to_string(sps.size()) + " staypoints");
  }

  void trips() {
    const auto positioned = read_positioned(artifact("positioned.csv", Stage::position));
    const auto sps = read_staypoints(artifact("staypoints.csv", Stage::stays));
    const TripSet set = build_trips(positioned, sps, c_.modes, c_.gap_threshold_s);
    emit("triplegs.csv", write_triplegs(set.trips));
    emit("trips.csv", write_trips(set.trips));
    info(std::to_string(set.trips.size()) + " trips, " + std::to_string(set.triplegs.size()) + " triplegs");
  }

  void log() {
    const auto trips = read_trips(artifact("trips.csv", Stage::trips), artifact("triplegs.csv", Stage::trips));
    const auto sps = read_staypoints(artifact("staypoints.csv", Stage::stays));
    const auto land = regions();
    const RegionIndex index(land);
    const CaseLogBuild cl = build_case_log(trips, sps, index, c_.level);
    emit("case_log.csv", write_case_log(cl.log));
    std::optional<LogStats> ocel_stats;
    if (c_.ocel) {
      const OcelBuild ob = build_ocel(trips, sps, index, c_.level);
      emit("ocel.json", write_ocel(ob.ocel));
      ocel_stats = compute_stats(ob.ocel);
    }
    emit("log_stats.json", write_stats_json(compute_stats(cl.log), ocel_stats));
    emit("dropped_trips.csv", write_dropped(cl.dropped));
    info(std::to_string(cl.log.traces.size()) + " traces, " + std::to_string(cl.dropped.size()) + " trips dropped");
  }

  void discover() {
    const CaseLog log = read_case_log(artifact("case_log.csv", Stage::log));
    const Dfg dfg = annotate_durations(discover_dfg(log), log);
    DotOptions dot;
    dot.show_duration = true;
    dot.min_arc_frequency = c_.min_arc_frequency;
    emit("dfg.json", export_json(dfg));
    emit("dfg.dot", export_dot(dfg, dot));
    const auto variants = extract_variants(log, c_.top_k == 0 ? std::nullopt : std::optional<std::size_t>(c_.top_k));
    emit("variants.csv", write_variants(variants));
    if (c_.ocel) {
      const Ocel ocel = read_ocel(artifact("ocel.json", Stage::log));
      const OcDfg model = discover_ocdfg(ocel);
      DotOptions oc = dot;
      oc.exclude_types = {std::string(kModeObjectType)};
      emit("ocdfg.json", export_json(model));
      emit("ocdfg.dot", export_dot(model, oc));
    }
    info(std::to_string(dfg.nodes.size()) + " activities, " + std::to_string(dfg.arcs.size()) + " arcs");
  }

  void conform() {
    const Dfg dfg = read_dfg_json(artifact("dfg.json", Stage::discover));
    const CaseLog log = read_case_log(artifact("case_log.csv", Stage::log));
    const PetriNet net = dfg_to_workflow_net(dfg);
    const FitnessReport report = token_replay(net, log);
    emit("net.dot", export_net_dot(net));
    emit("fitness.json", write_fitness_json(report));
    emit("fitness_traces.csv", write_fitness_traces(report));
    info("fitness " + format_double(report.fitness) + " over " + std::to_string(report.n_traces) + " traces");
  }

  void validate() {
    const auto trips = read_trips(artifact("trips.csv", Stage::trips), artifact("triplegs.csv", Stage::trips));
    const auto sps = read_staypoints(artifact("staypoints.csv", Stage::stays));
    const auto land = regions();
    const RegionIndex index(land);
    const OdBuild od = build_od_matrix(trips, sps, index, c_.level);
    emit("od_matrix.csv", write_od_matrix(od.od));

    std::optional<fs::path> survey_path = c_.survey;
    if (survey_path && !fs::exists(*survey_path)) {
      throw Error(Errc::io_error, "survey file " + survey_path->string() + " does not exist");
    }
    if (!survey_path && !c_.cdr && fs::exists(dir_ / "survey.csv")) survey_path = dir_ / "survey.csv";
    ShareComparison comparison;
    comparison.total = od.od.total;
    comparison.origin = c_.survey_origin;
    if (survey_path) {
      AliasMap aliases;
      if (c_.aliases) {
        if (!fs::exists(*c_.aliases)) throw Error(Errc::io_error, "aliases file " + c_.aliases->string() + " does not exist");
        aliases = read_aliases(*c_.aliases);
      }
      const SurveyFile survey = read_survey(*survey_path);
      if (!survey.shares.empty()) {
        comparison = compare_shares(od.od, survey.shares, {c_.survey_origin, aliases});
      }
      if (!survey.pairs.empty()) regress_pairs(od.od, survey.pairs, aliases, comparison);
    }
    emit("validation.json", write_validation_json(comparison));
    if (comparison.regression) info("survey regression r = " + format_double(comparison.regression->r));

    if (!c_.cdr) {
      const GroundTruth truth = read_ground_truth(artifact("ground_truth.json", Stage::synth));
      const RecoveryReport r = score_recovery(truth, sps, trips, c_.stops.r1_m);
      emit("recovery.json", write_recovery_json(r));
      info("staypoint precision " + format_double(r.precision) + ", recall " + format_double(r.recall));
    }
  }

  Stage stage_;
  const PipelineConfig& c_;
  const RunOptions& o_;
  fs::path dir_;
};

}  // namespace

void run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options) {
  if (config.threads > 0) omp_set_num_threads(config.threads);
  set_log_level(config.log_level);
  try {
    config.validate();
    StageRun(stage, config, options)();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(to_string(stage)) + ": " + e.what());
  }
}

void run_all(const PipelineConfig& config, const RunOptions& options) {
  for (Stage s : kAllStages) {
    if (s == Stage::synth && config.cdr) continue;
    run_stage(s, config, options);
  }
}

}  // namespace cdrpm
