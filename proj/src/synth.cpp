#include "cdrpm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "cdrpm/error.hpp"
#include "json.hpp"

namespace cdrpm {

double Rng::exponential(double rate) {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log(1.0 - uniform()) / rate;
}

std::size_t Rng::weighted(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

std::string_view to_string(AnchorKind kind) {
  switch (kind) {
    case AnchorKind::home: return "home";
    case AnchorKind::work: return "work";
    case AnchorKind::other: return "other";
    case AnchorKind::transfer: return "transfer";
  }
  return "other";
}

namespace {

AnchorKind parse_anchor_kind(std::string_view s) {
  for (auto k : {AnchorKind::home, AnchorKind::work, AnchorKind::other, AnchorKind::transfer}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::invalid_input, "unknown anchor kind '" + std::string(s) + "'");
}

[[noreturn]] void bad_config(const std::string& field, const std::string& why) {
  throw Error(Errc::invalid_config, "synth." + field + ": " + why);
}

constexpr double kMetersPerDegree = 6371000.0 * std::numbers::pi / 180.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_agents == 0) bad_config("n_agents", "must be positive");
  if (n_days == 0) bad_config("n_days", "must be positive");
  if (tower_rows == 0 || tower_cols == 0) bad_config("tower_rows", "grid must be non-empty");
  if (!(tower_spacing_m > 0.0)) bad_config("tower_spacing_m", "must be positive");
  if (!(sector_radius_m > 0.0) || sector_radius_m * 2.0 >= tower_spacing_m) {
    bad_config("sector_radius_m", "must be positive and below half the tower spacing");
  }
  if (sectors_per_tower == 0) bad_config("sectors_per_tower", "must be positive");
  if (!origin.valid()) bad_config("origin", "not a valid coordinate");
  if (parish_towers == 0 || tower_rows % parish_towers != 0 || tower_cols % parish_towers != 0) {
    bad_config("parish_towers", "must divide the tower grid");
  }
  if (municipality_parishes == 0 || (tower_rows / parish_towers) % municipality_parishes != 0 ||
      (tower_cols / parish_towers) % municipality_parishes != 0) {
    bad_config("municipality_parishes", "must divide the parish grid");
  }
  if (trips_per_day_min > trips_per_day_max) bad_config("trips_per_day_min", "exceeds trips_per_day_max");
  if (!(min_anchor_separation_m >= 0.0)) bad_config("min_anchor_separation_m", "must be non-negative");
  if (day_start_s < 0 || day_start_s >= 86400) bad_config("day_start_s", "must lie within a day");
  if (day_start_jitter_s < 0 || dwell_jitter_s < 0) bad_config("dwell_jitter_s", "must be non-negative");
  if (min_dwell_s <= 0 || transfer_dwell_s <= 0) bad_config("min_dwell_s", "dwells must be positive");
  if (!(transfer_prob >= 0.0 && transfer_prob <= 1.0)) bad_config("transfer_prob", "must lie in [0, 1]");
  if (!(noise >= 0.0 && noise <= 1.0)) bad_config("noise", "must lie in [0, 1]");
  if (!(speed_jitter >= 0.0 && speed_jitter <= 1.0)) bad_config("speed_jitter", "must lie in [0, 1]");
  if (!(dwell_pings_per_hour > 0.0)) bad_config("dwell_pings_per_hour", "must be positive");
  if (!(moving_pings_per_hour >= 0.0)) bad_config("moving_pings_per_hour", "must be non-negative");
  double sum = 0.0;
  for (const auto& [mode, p] : mode_mix) {
    if (mode == Mode::unknown) bad_config("mode_mix", "unknown is not a travel mode");
    if (!(p >= 0.0)) bad_config("mode_mix", "negative probability for " + std::string(to_string(mode)));
    sum += p;
    if (p > 0.0 && !speed_bands.contains(mode)) bad_config("speed_bands", "missing band for " + std::string(to_string(mode)));
  }
  if (std::abs(sum - 1.0) > 1e-9) bad_config("mode_mix", "probabilities sum to " + format_double(sum));
  for (const auto& [mode, band] : speed_bands) {
    if (!(band.lo_kmh > 0.0 && band.hi_kmh > band.lo_kmh)) {
      bad_config("speed_bands", "band for " + std::string(to_string(mode)) + " must satisfy 0 < lo < hi");
    }
  }
  try {
    thresholds.validate();
  } catch (const Error& e) {
    bad_config("thresholds", e.what());
  }
}

RobustSpeed robust_speed(Mode mode, double length_m, SpeedBand band, const ModeThresholds& t, double max_window) {
  const double speed_cuts[] = {t.walk_max_kmh, t.bicycle_max_kmh, t.bus_max_kmh,
                               t.bus_short_max_kmh, t.car_max_kmh, t.train_long_min_kmh};
  const double length_cuts[] = {t.bus_short_length_m, t.train_long_length_m};
  constexpr int kSteps = 512;
  std::vector<std::pair<double, double>> candidates;  // (speed, window)
  std::vector<double> cuts;
  for (int i = 0; i <= kSteps; ++i) {
    const double s = band.lo_kmh * std::pow(band.hi_kmh / band.lo_kmh, static_cast<double>(i) / kSteps);
    cuts.clear();
    for (double c : speed_cuts) cuts.push_back(c / s);
    for (double c : length_cuts) cuts.push_back(c / length_m);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto label = [&](double f) { return t.classify(s * f, length_m * f); };
    double window = 0.0;
    if (label(1.0) == mode) {
      // Walk outward over the piecewise-constant segments while the label holds.
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
      for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) {
        if (*it > 1.0) continue;
        if (label(*it * 0.9999) != mode) {
          lo = *it;
          break;
        }
      }
      for (double c : cuts) {
        if (c <= 1.0) continue;
        if (label(c * 1.0001) != mode) {
          hi = c;
          break;
        }
      }
      window = std::min(lo > 0.0 ? 1.0 / lo : std::numeric_limits<double>::infinity(), hi);
    }
    candidates.emplace_back(s, window);
  }
  double best = 0.0;
  for (const auto& c : candidates) best = std::max(best, c.second);
  if (!(best > 1.0)) {
    throw Error(Errc::invalid_config, "synth.speed_bands: no speed in the " + std::string(to_string(mode)) +
                                          " band classifies as " + std::string(to_string(mode)) + " at " +
                                          format_double(length_m) + " m");
  }
  const double target = std::min(best, max_window) * (1.0 - 1e-9);
  const double centre = std::log(std::sqrt(band.lo_kmh * band.hi_kmh));
  RobustSpeed out;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& [s, w] : candidates) {
    if (w < target) continue;
    const double gap = std::abs(std::log(s) - centre);
    if (gap < best_gap) {
      best_gap = gap;
      out = {s, std::min(w, max_window)};
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tower grid

TowerGrid::TowerGrid(const ScenarioConfig& c)
    : rows_(c.tower_rows),
      cols_(c.tower_cols),
      per_tower_(c.sectors_per_tower),
      spacing_(c.tower_spacing_m),
      m_per_deg_lat_(kMetersPerDegree),
      origin_(c.origin) {
  const double mid_lat = c.origin.lat + static_cast<double>(rows_) * spacing_ / m_per_deg_lat_ / 2.0;
  m_per_deg_lon_ = kMetersPerDegree * std::cos(mid_lat * std::numbers::pi / 180.0);
  const double beam = 360.0 / static_cast<double>(per_tower_);
  char id[48];
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t col = 0; col < cols_; ++col) {
      const GeoPoint centre{origin_.lat + (static_cast<double>(r) + 0.5) * spacing_ / m_per_deg_lat_,
                            origin_.lon + (static_cast<double>(col) + 0.5) * spacing_ / m_per_deg_lon_};
      for (std::size_t k = 0; k < per_tower_; ++k) {
        std::snprintf(id, sizeof id, "c%02zu%02zu-%zu", r, col, k);
        sectors_.push_back({id, centre, static_cast<double>(k) * beam, per_tower_ == 1 ? 360.0 : beam,
                            c.sector_radius_m});
      }
    }
  }
}

std::size_t TowerGrid::nearest_tower(GeoPoint p, std::size_t k) const {
  const double fy = (p.lat - origin_.lat) * m_per_deg_lat_ / spacing_ - 0.5;
  const double fx = (p.lon - origin_.lon) * m_per_deg_lon_ / spacing_ - 0.5;
  const auto clampi = [](double v, std::size_t n) {
    return static_cast<std::ptrdiff_t>(std::clamp(std::round(v), 0.0, static_cast<double>(n - 1)));
  };
  const auto r0 = clampi(fy, rows_), c0 = clampi(fx, cols_);
  std::vector<std::pair<double, std::size_t>> near;
  for (auto r = r0 - 2; r <= r0 + 2; ++r) {
    for (auto c = c0 - 2; c <= c0 + 2; ++c) {
      if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(rows_) || c >= static_cast<std::ptrdiff_t>(cols_)) {
        continue;
      }
      const auto t = static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(c);
      near.emplace_back(haversine_distance(tower_center(t), p), t);
    }
  }
  std::sort(near.begin(), near.end());
  return near[std::min(k, near.size() - 1)].second;
}

const TowerSector& TowerGrid::sector_toward(std::size_t tower, GeoPoint p) const {
  const GeoPoint centre = tower_center(tower);
  if (per_tower_ == 1 || haversine_distance(centre, p) == 0.0) return sectors_[tower * per_tower_];
  const double beam = 360.0 / static_cast<double>(per_tower_);
  const double b = normalize_azimuth(initial_bearing(centre, p) + beam / 2.0);
  const auto k = static_cast<std::size_t>(b / beam) % per_tower_;
  return sectors_[tower * per_tower_ + k];
}

namespace {

std::vector<Region> make_regions(const ScenarioConfig& c) {
  static constexpr std::array<const char*, 9> kNames = {"Oeiras", "Lisboa",  "Loures", "Cascais", "Amadora",
                                                        "Odivelas", "Sintra", "Almada", "Seixal"};
  const double m_lat = kMetersPerDegree;
  const double mid_lat = c.origin.lat + static_cast<double>(c.tower_rows) * c.tower_spacing_m / m_lat / 2.0;
  const double m_lon = kMetersPerDegree * std::cos(mid_lat * std::numbers::pi / 180.0);
  const double side = static_cast<double>(c.parish_towers) * c.tower_spacing_m;
  const std::size_t prow = c.tower_rows / c.parish_towers, pcol = c.tower_cols / c.parish_towers;
  const std::size_t mp = c.municipality_parishes;
  const std::size_t mrow = prow / mp, mcol = pcol / mp;
  const bool named = mrow * mcol == kNames.size();

  auto rect = [&](std::size_t r, std::size_t col, std::size_t span) {
    const double lat0 = c.origin.lat + static_cast<double>(r) * side / m_lat;
    const double lat1 = c.origin.lat + static_cast<double>(r + span) * side / m_lat;
    const double lon0 = c.origin.lon + static_cast<double>(col) * side / m_lon;
    const double lon1 = c.origin.lon + static_cast<double>(col + span) * side / m_lon;
    return Ring{{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}, {lat0, lon0}};
  };
  char buf[64];
  std::vector<Region> out;
  std::vector<std::string> muni_names;
  for (std::size_t r = 0; r < mrow; ++r) {
    for (std::size_t col = 0; col < mcol; ++col) {
      Region m;
      std::snprintf(buf, sizeof buf, "M%02zu%02zu", r, col);
      m.region_id = buf;
      if (named) {
        m.name = kNames[r * mcol + col];
      } else {
        std::snprintf(buf, sizeof buf, "Municipality %zu-%zu", r, col);
        m.name = buf;
      }
      m.level = RegionLevel::municipality;
      m.boundary = {rect(r * mp, col * mp, mp)};
      out.push_back(std::move(m));
    }
  }
  for (std::size_t r = 0; r < prow; ++r) {
    for (std::size_t col = 0; col < pcol; ++col) {
      const Region& parent = out[(r / mp) * mcol + col / mp];
      Region p;
      std::snprintf(buf, sizeof buf, "P%02zu%02zu", r, col);
      p.region_id = buf;
      std::snprintf(buf, sizeof buf, " %zu", (r % mp) * mp + col % mp + 1);
      p.name = parent.name + buf;
      p.level = RegionLevel::parish;
      p.parent_id = parent.region_id;
      p.boundary = {rect(r, col, 1)};
      out.push_back(std::move(p));
    }
  }
  return out;
}

GeoPoint lerp(GeoPoint a, GeoPoint b, double f) {
  return {a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f};
}

struct AgentOutput {
  AgentTruth truth;
  std::vector<CdrEvent> events;
};

class AgentBuilder {
 public:
  AgentBuilder(const ScenarioConfig& c, const TowerGrid& grid, const RegionIndex& regions, std::size_t index,
               std::string user_id)
      : c_(c), grid_(grid), regions_(regions), rng_(splitmix64(c.seed ^ splitmix64(index + 1))) {
    out_.truth.user_id = std::move(user_id);
    for (const auto& [mode, p] : c_.mode_mix) {
      modes_.push_back(mode);
      weights_.push_back(p);
    }
  }

  AgentOutput build() {
    place_anchors();
    const Timestamp end_of_run = c_.epoch + static_cast<Timestamp>(c_.n_days) * 86400;
    std::size_t cur = 0;  // home
    Timestamp dwell_start = c_.epoch;
    for (std::size_t day = 0; day < c_.n_days; ++day) {
      const auto n = c_.trips_per_day_min + rng_.index(c_.trips_per_day_max - c_.trips_per_day_min + 1);
      Timestamp depart = c_.epoch + static_cast<Timestamp>(day) * 86400 + c_.day_start_s +
                         static_cast<Timestamp>(rng_.uniform() * static_cast<double>(c_.day_start_jitter_s));
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
          depart = dwell_start + c_.min_dwell_s +
                   static_cast<Timestamp>(rng_.uniform() * static_cast<double>(c_.dwell_jitter_s));
        }
        depart = std::max(depart, dwell_start + c_.min_dwell_s);
        const std::size_t dest = pick_destination(cur, i, n);
        const auto& a = out_.truth.anchors;
        const std::size_t origin_sp = close_dwell(a[cur].location, a[cur].kind, dwell_start, depart);
        dwell_start = travel(origin_sp, a[cur].location, a[dest].location, depart);
        cur = dest;
      }
    }
    const auto& a = out_.truth.anchors[cur];
    close_dwell(a.location, a.kind, dwell_start, std::max(end_of_run, dwell_start + c_.min_dwell_s));
    return std::move(out_);
  }

 private:
  void place_anchors() {
    const std::size_t n = 2 + c_.other_anchors;
    for (std::size_t k = 0; k < n; ++k) {
      const AnchorKind kind = k == 0 ? AnchorKind::home : k == 1 ? AnchorKind::work : AnchorKind::other;
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const GeoPoint p = random_site();
        placed = std::all_of(out_.truth.anchors.begin(), out_.truth.anchors.end(), [&](const Anchor& o) {
          return haversine_distance(o.location, p) >= c_.min_anchor_separation_m;
        });
        if (placed) out_.truth.anchors.push_back({kind, p, grid_.sector_toward(grid_.nearest_tower(p), p).cell_id});
      }
      if (!placed) {
        throw Error(Errc::invalid_config,
                    "synth.min_anchor_separation_m: cannot place anchors this far apart on the tower grid");
      }
    }
  }

  GeoPoint random_site() {
    const auto& sectors = grid_.sectors();
    const TowerSector& s = sectors[rng_.index(sectors.size())];
    return sample_sector_point(s, rng_.next(), {});
  }

  std::size_t pick_destination(std::size_t cur, std::size_t i, std::size_t n) {
    const std::size_t count = out_.truth.anchors.size();
    if (i + 1 == n && n >= 2 && cur != 0) return 0;
    std::vector<std::size_t> options;
    for (std::size_t k = 1; k < count; ++k) {
      if (k != cur) options.push_back(k);
    }
    if (options.empty()) return cur == 0 ? 1 : 0;
    return options[rng_.index(options.size())];
  }

  std::string cell_at(GeoPoint p) {
    std::size_t k = 0;
    if (c_.noise > 0.0 && rng_.bernoulli(c_.noise)) k = 1;
    const std::size_t tower = grid_.nearest_tower(p, k);
    return grid_.sector_toward(tower, p).cell_id;
  }

  void ping(GeoPoint p, Timestamp t) { out_.events.push_back({out_.truth.user_id, t, cell_at(p)}); }

  std::size_t close_dwell(GeoPoint where, AnchorKind kind, Timestamp start, Timestamp end) {
    TrueStaypoint sp{start, end, where, kind, {}, {}};
    sp.parish = assign_region(where, regions_, RegionLevel::parish).value_or("");
    sp.municipality = assign_region(where, regions_, RegionLevel::municipality).value_or("");
    out_.truth.staypoints.push_back(std::move(sp));
    ping(where, start);
    const double step = 3600.0 / c_.dwell_pings_per_hour;
    double t = static_cast<double>(start);
    while (true) {
      t += step * rng_.uniform(0.75, 1.25);
      const auto ts = static_cast<Timestamp>(t);
      if (ts >= end) break;
      ping(where, ts);
    }
    if (end > start) ping(where, end);
    return out_.truth.staypoints.size() - 1;
  }

  TrueLeg move(GeoPoint from, GeoPoint to, Timestamp depart) {
    TrueLeg leg;
    leg.mode = modes_[rng_.weighted(weights_)];
    leg.length_m = haversine_distance(from, to);
    const SpeedBand band = c_.speed_bands.at(leg.mode);
    const RobustSpeed rs = robust_speed(leg.mode, leg.length_m, band, c_.thresholds);
    double speed = rs.speed_kmh;
    if (c_.speed_jitter > 0.0) {
      const double spread = std::log(rs.window) * c_.speed_jitter * 0.999;
      speed *= std::exp(rng_.uniform(-spread, spread));
    }
    const auto duration = std::max<Timestamp>(1, std::llround(leg.length_m * 3.6 / speed));
    leg.t_start = depart;
    leg.t_end = depart + duration;
    leg.speed_kmh = leg.length_m * 3.6 / static_cast<double>(duration);

    // Moving pings. The endpoint towers stay silent so a ping on the way out
    // cannot stretch the dwell it leaves, and a tower is heard at most once
    // per visit so a slow walker never looks stationary.
    if (c_.moving_pings_per_hour > 0.0) {
      const std::size_t t_from = grid_.nearest_tower(from), t_to = grid_.nearest_tower(to);
      std::size_t last = t_from;
      const double rate = c_.moving_pings_per_hour / 3600.0;
      double t = static_cast<double>(depart);
      while (true) {
        t += rng_.exponential(rate);
        const auto ts = static_cast<Timestamp>(t);
        if (ts >= leg.t_end) break;
        if (ts <= depart) continue;
        const GeoPoint p = lerp(from, to, (t - static_cast<double>(depart)) / static_cast<double>(duration));
        const std::size_t tower = grid_.nearest_tower(p);
        if (tower == t_from || tower == t_to || tower == last) continue;
        last = tower;
        ping(p, ts);
      }
    }
    return leg;
  }

  // Returns the arrival time; records the trip and any transfer dwell.
  Timestamp travel(std::size_t origin_sp, GeoPoint from, GeoPoint to, Timestamp depart) {
    TrueTrip trip;
    trip.origin = origin_sp;
    trip.t_start = depart;
    std::optional<GeoPoint> via;
    if (c_.transfer_prob > 0.0 && rng_.bernoulli(c_.transfer_prob)) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const GeoPoint p = random_site();
        const double a = haversine_distance(from, p), b = haversine_distance(p, to);
        if (a >= c_.min_transfer_leg_m && b >= c_.min_transfer_leg_m &&
            a + b <= 1.5 * haversine_distance(from, to)) {
          via = p;
          break;
        }
      }
    }
    if (via) {
      trip.legs.push_back(move(from, *via, depart));
      const Timestamp resume = trip.legs.back().t_end + c_.transfer_dwell_s;
      close_dwell(*via, AnchorKind::transfer, trip.legs.back().t_end, resume);
      trip.legs.push_back(move(*via, to, resume));
    } else {
      trip.legs.push_back(move(from, to, depart));
    }
    trip.t_end = trip.legs.back().t_end;
    trip.destination = out_.truth.staypoints.size();  // the dwell opened on arrival
    out_.truth.trips.push_back(std::move(trip));
    return out_.truth.trips.back().t_end;
  }

  const ScenarioConfig& c_;
  const TowerGrid& grid_;
  const RegionIndex& regions_;
  Rng rng_;
  std::vector<Mode> modes_;
  std::vector<double> weights_;
  AgentOutput out_;
};

}  // namespace

std::size_t GroundTruth::trip_count() const {
  std::size_t n = 0;
  for (const auto& a : agents) n += a.trips.size();
  return n;
}

std::size_t GroundTruth::staypoint_count() const {
  std::size_t n = 0;
  for (const auto& a : agents) n += a.staypoints.size();
  return n;
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  const TowerGrid grid(config);
  Scenario out;
  out.towers = grid.sectors();
  out.regions = make_regions(config);
  const RegionIndex index(out.regions);
  out.truth.seed = config.seed;

  const int width = std::max<int>(4, static_cast<int>(std::to_string(config.n_agents - 1).size()));
  std::vector<AgentOutput> agents(config.n_agents);
  std::vector<std::exception_ptr> errors(config.n_agents);
  const auto n = static_cast<std::int64_t>(config.n_agents);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      char id[32];
      std::snprintf(id, sizeof id, "u%0*zu", width, k);
      agents[k] = AgentBuilder(config, grid, index, k, id).build();
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto& a : agents) {
    out.events.insert(out.events.end(), std::make_move_iterator(a.events.begin()),
                      std::make_move_iterator(a.events.end()));
    out.truth.agents.push_back(std::move(a.truth));
  }
  std::stable_sort(out.events.begin(), out.events.end(), [](const CdrEvent& a, const CdrEvent& b) {
    return std::tie(a.user_id, a.timestamp) < std::tie(b.user_id, b.timestamp);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

Timestamp overlap(Timestamp a0, Timestamp a1, Timestamp b0, Timestamp b1) {
  return std::min(a1, b1) - std::max(a0, b0);
}

bool overlaps_enough(Timestamp a0, Timestamp a1, Timestamp b0, Timestamp b1) {
  const Timestamp o = overlap(a0, a1, b0, b1);
  if (o < 0) return false;
  return 2 * o >= std::min(a1 - a0, b1 - b0);
}

}  // namespace

RecoveryReport score_recovery(const GroundTruth& truth, std::span<const Staypoint> staypoints,
                              std::span<const Trip> trips, double r1_m) {
  std::unordered_map<std::string_view, const AgentTruth*> agents;
  for (const auto& a : truth.agents) agents.emplace(a.user_id, &a);
  std::map<std::string_view, std::vector<const Staypoint*>> sp_by_user;
  std::unordered_map<std::string_view, const Staypoint*> sp_by_id;
  for (const auto& sp : staypoints) {
    if (!agents.contains(sp.user_id)) {
      throw Error(Errc::scenario_mismatch, "staypoint " + sp.staypoint_id + " names unknown user " + sp.user_id);
    }
    sp_by_user[sp.user_id].push_back(&sp);
    sp_by_id.emplace(sp.staypoint_id, &sp);
  }
  std::map<std::string_view, std::vector<const Tripleg*>> legs_by_user;
  for (const auto& t : trips) {
    if (!agents.contains(t.user_id)) {
      throw Error(Errc::scenario_mismatch, "trip " + t.trip_id + " names unknown user " + t.user_id);
    }
    for (const auto& leg : t.triplegs) legs_by_user[t.user_id].push_back(&leg);
  }

  RecoveryReport r;
  r.true_staypoints = truth.staypoint_count();
  r.detected_staypoints = staypoints.size();
  r.true_trips = truth.trip_count();
  r.detected_trips = trips.size();

  std::size_t legs_correct = 0;
  for (const auto& agent : truth.agents) {
    // Staypoints: each detection claims the unmatched true dwell it overlaps most.
    std::vector<bool> used(agent.staypoints.size(), false);
    if (const auto it = sp_by_user.find(agent.user_id); it != sp_by_user.end()) {
      for (const Staypoint* d : it->second) {
        std::size_t best = agent.staypoints.size();
        Timestamp best_overlap = -1;
        for (std::size_t j = 0; j < agent.staypoints.size(); ++j) {
          const auto& t = agent.staypoints[j];
          if (used[j] || !overlaps_enough(t.t_start, t.t_end, d->t_start, d->t_end)) continue;
          if (haversine_distance(t.location, d->median) > r1_m) continue;
          const Timestamp o = overlap(t.t_start, t.t_end, d->t_start, d->t_end);
          if (o > best_overlap) {
            best_overlap = o;
            best = j;
          }
        }
        if (best < used.size()) {
          used[best] = true;
          ++r.matched_staypoints;
        }
      }
    }
    // Legs: same rule on time alone.
    std::vector<const TrueLeg*> true_legs;
    for (const auto& trip : agent.trips) {
      for (const auto& leg : trip.legs) true_legs.push_back(&leg);
    }
    std::vector<bool> leg_used(true_legs.size(), false);
    if (const auto it = legs_by_user.find(agent.user_id); it != legs_by_user.end()) {
      for (const Tripleg* d : it->second) {
        std::size_t best = true_legs.size();
        Timestamp best_overlap = -1;
        for (std::size_t j = 0; j < true_legs.size(); ++j) {
          const auto* t = true_legs[j];
          if (leg_used[j] || !overlaps_enough(t->t_start, t->t_end, d->t_start, d->t_end)) continue;
          const Timestamp o = overlap(t->t_start, t->t_end, d->t_start, d->t_end);
          if (o > best_overlap) {
            best_overlap = o;
            best = j;
          }
        }
        if (best < true_legs.size()) {
          leg_used[best] = true;
          ++r.matched_legs;
          ++r.mode_confusion[true_legs[best]->mode][d->mode];
          if (true_legs[best]->mode == d->mode) ++legs_correct;
        }
      }
    }
  }
  r.precision_vacuous = r.detected_staypoints == 0;
  r.precision = r.precision_vacuous ? 1.0
                                    : static_cast<double>(r.matched_staypoints) /
                                          static_cast<double>(r.detected_staypoints);
  r.recall = r.true_staypoints == 0 ? 1.0
                                    : static_cast<double>(r.matched_staypoints) /
                                          static_cast<double>(r.true_staypoints);
  r.trip_count_deviation =
      r.true_trips == 0 ? 0.0
                        : (static_cast<double>(r.detected_trips) - static_cast<double>(r.true_trips)) /
                              static_cast<double>(r.true_trips);
  r.mode_accuracy = r.matched_legs == 0 ? 1.0 : static_cast<double>(legs_correct) / static_cast<double>(r.matched_legs);

  // Municipality OD agreement.
  std::map<std::pair<std::string, std::string>, std::size_t> od_true, od_found;
  std::size_t total_true = 0, total_found = 0;
  for (const auto& a : truth.agents) {
    for (const auto& t : a.trips) {
      ++od_true[{a.staypoints[t.origin].municipality, a.staypoints[t.destination].municipality}];
      ++total_true;
    }
  }
  for (const auto& t : trips) {
    const auto o = sp_by_id.find(t.origin), d = sp_by_id.find(t.destination);
    if (o == sp_by_id.end() || d == sp_by_id.end()) continue;
    if (!o->second->region_municipality || !d->second->region_municipality) continue;
    ++od_found[{*o->second->region_municipality, *d->second->region_municipality}];
    ++total_found;
  }
  std::size_t agree = 0;
  for (const auto& [cell, n] : od_true) {
    if (const auto it = od_found.find(cell); it != od_found.end()) agree += std::min(n, it->second);
  }
  const std::size_t denom = std::max(total_true, total_found);
  r.od_agreement = denom == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(denom);
  return r;
}

std::vector<SurveyPair> survey_from_truth(const GroundTruth& truth, std::span<const Region> regions,
                                          std::uint64_t seed, double spread) {
  std::map<std::string, std::string> names;
  for (const auto& r : regions) names[r.region_id] = r.name;
  auto name_of = [&](const std::string& id) {
    const auto it = names.find(id);
    return it == names.end() ? id : it->second;
  };
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& a : truth.agents) {
    for (const auto& t : a.trips) {
      ++counts[{name_of(a.staypoints[t.origin].municipality), name_of(a.staypoints[t.destination].municipality)}];
    }
  }
  Rng rng(splitmix64(seed ^ 0x5375727665790000ULL));
  std::vector<SurveyPair> out;
  for (const auto& [cell, n] : counts) {
    const double scaled = static_cast<double>(n) * rng.uniform(1.0 - spread, 1.0 + spread);
    out.push_back({cell.first, cell.second, std::round(scaled)});
  }
  return out;
}

std::string write_survey_pairs(std::span<const SurveyPair> pairs) {
  std::ostringstream out;
  csv::write_row(out, {"origin", "destination", "trips"});
  for (const auto& p : pairs) csv::write_row(out, {p.origin, p.destination, format_double(p.trips)});
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

namespace {
using ojson = nlohmann::ordered_json;
}

std::string write_ground_truth(const GroundTruth& truth) {
  ojson doc;
  doc["seed"] = truth.seed;
  doc["agents"] = ojson::array();
  for (const auto& a : truth.agents) {
    ojson agent;
    agent["user_id"] = a.user_id;
    agent["anchors"] = ojson::array();
    for (const auto& an : a.anchors) {
      agent["anchors"].push_back({{"kind", to_string(an.kind)},
                                  {"lat", an.location.lat},
                                  {"lon", an.location.lon},
                                  {"cell_id", an.cell_id}});
    }
    agent["staypoints"] = ojson::array();
    for (const auto& sp : a.staypoints) {
      agent["staypoints"].push_back({{"kind", to_string(sp.kind)},
                                     {"t_start", format_iso8601(sp.t_start)},
                                     {"t_end", format_iso8601(sp.t_end)},
                                     {"lat", sp.location.lat},
                                     {"lon", sp.location.lon},
                                     {"parish", sp.parish},
                                     {"municipality", sp.municipality}});
    }
    agent["trips"] = ojson::array();
    for (const auto& t : a.trips) {
      ojson trip{{"origin", t.origin},
                 {"destination", t.destination},
                 {"t_start", format_iso8601(t.t_start)},
                 {"t_end", format_iso8601(t.t_end)},
                 {"legs", ojson::array()}};
      for (const auto& leg : t.legs) {
        trip["legs"].push_back({{"mode", to_string(leg.mode)},
                                {"t_start", format_iso8601(leg.t_start)},
                                {"t_end", format_iso8601(leg.t_end)},
                                {"length_m", leg.length_m},
                                {"speed_kmh", leg.speed_kmh}});
      }
      agent["trips"].push_back(std::move(trip));
    }
    doc["agents"].push_back(std::move(agent));
  }
  return doc.dump(1) + "\n";
}

GroundTruth parse_ground_truth(std::string_view text, const std::string& source) {
  GroundTruth out;
  try {
    const auto doc = nlohmann::json::parse(text);
    out.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& a : doc.at("agents")) {
      AgentTruth agent;
      agent.user_id = a.at("user_id").get<std::string>();
      for (const auto& an : a.at("anchors")) {
        agent.anchors.push_back({parse_anchor_kind(an.at("kind").get<std::string>()),
                                 {an.at("lat").get<double>(), an.at("lon").get<double>()},
                                 an.at("cell_id").get<std::string>()});
      }
      for (const auto& sp : a.at("staypoints")) {
        agent.staypoints.push_back({parse_iso8601(sp.at("t_start").get<std::string>()),
                                    parse_iso8601(sp.at("t_end").get<std::string>()),
                                    {sp.at("lat").get<double>(), sp.at("lon").get<double>()},
                                    parse_anchor_kind(sp.at("kind").get<std::string>()),
                                    sp.at("parish").get<std::string>(),
                                    sp.at("municipality").get<std::string>()});
      }
      for (const auto& t : a.at("trips")) {
        TrueTrip trip;
        trip.origin = t.at("origin").get<std::size_t>();
        trip.destination = t.at("destination").get<std::size_t>();
        if (trip.origin >= agent.staypoints.size() || trip.destination >= agent.staypoints.size()) {
          throw Error(Errc::invalid_input, source + ": trip endpoint index out of range for " + agent.user_id);
        }
        trip.t_start = parse_iso8601(t.at("t_start").get<std::string>());
        trip.t_end = parse_iso8601(t.at("t_end").get<std::string>());
        for (const auto& leg : t.at("legs")) {
          trip.legs.push_back({parse_iso8601(leg.at("t_start").get<std::string>()),
                               parse_iso8601(leg.at("t_end").get<std::string>()),
                               parse_mode(leg.at("mode").get<std::string>()), leg.at("length_m").get<double>(),
                               leg.at("speed_kmh").get<double>()});
        }
        agent.trips.push_back(std::move(trip));
      }
      out.agents.push_back(std::move(agent));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_input, source + ": " + e.what());
  }
  return out;
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  return parse_ground_truth(read_file(path), path.string());
}

std::string write_recovery_json(const RecoveryReport& r) {
  ojson doc;
  doc["staypoints"] = {{"true", r.true_staypoints},
                       {"detected", r.detected_staypoints},
                       {"matched", r.matched_staypoints},
                       {"precision", r.precision},
                       {"precision_vacuous", r.precision_vacuous},
                       {"recall", r.recall}};
  doc["trips"] = {{"true", r.true_trips},
                  {"detected", r.detected_trips},
                  {"count_deviation", r.trip_count_deviation}};
  doc["od_agreement"] = r.od_agreement;
  ojson confusion = ojson::object();
  for (const auto& [t, row] : r.mode_confusion) {
    ojson o = ojson::object();
    for (const auto& [d, n] : row) o[std::string(to_string(d))] = n;
    confusion[std::string(to_string(t))] = std::move(o);
  }
  doc["modes"] = {{"matched_legs", r.matched_legs}, {"accuracy", r.mode_accuracy}, {"confusion", confusion}};
  return doc.dump(2) + "\n";
}

}  // namespace cdrpm
