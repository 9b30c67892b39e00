#include "cdrpm/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cdrpm/error.hpp"

namespace cdrpm {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
         lon <= 180.0;
}

double haversine_distance(GeoPoint a, GeoPoint b) {
  const double phi1 = a.lat * kDeg;
  const double phi2 = b.lat * kDeg;
  const double dphi = (b.lat - a.lat) * kDeg;
  const double dlambda = (b.lon - a.lon) * kDeg;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = std::min(1.0, s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double initial_bearing(GeoPoint from, GeoPoint to) {
  const double phi1 = from.lat * kDeg;
  const double phi2 = to.lat * kDeg;
  const double dlambda = (to.lon - from.lon) * kDeg;
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  return normalize_azimuth(std::atan2(y, x) / kDeg);
}

GeoPoint destination_point(GeoPoint origin, double bearing_deg, double distance_m) {
  const double delta = distance_m / kEarthRadiusM;
  const double theta = bearing_deg * kDeg;
  const double phi1 = origin.lat * kDeg;
  const double lambda1 = origin.lon * kDeg;
  const double sin_phi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
  const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
  const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                              std::cos(delta) - std::sin(phi1) * sin_phi2);
  double lon = lambda2 / kDeg;
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {phi2 / kDeg, lon};
}

double normalize_azimuth(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a = 0.0;
  return a;
}

double angular_difference(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

void TowerSector::validate() {
  if (cell_id.empty()) throw Error(Errc::invalid_input, "tower sector without cell_id");
  if (!center.valid()) throw Error(Errc::invalid_input, "sector " + cell_id + ": invalid center");
  if (!(radius_m > 0.0) || !std::isfinite(radius_m)) {
    throw Error(Errc::invalid_input, "sector " + cell_id + ": radius must be > 0");
  }
  if (!(beamwidth_deg > 0.0) || beamwidth_deg > 360.0) {
    throw Error(Errc::invalid_input, "sector " + cell_id + ": beamwidth must be in (0, 360]");
  }
  if (!std::isfinite(azimuth_deg)) throw Error(Errc::invalid_input, "sector " + cell_id + ": bad azimuth");
  azimuth_deg = normalize_azimuth(azimuth_deg);
}

bool sector_contains(const TowerSector& sector, GeoPoint p) {
  const double d = haversine_distance(sector.center, p);
  if (d > sector.radius_m) return false;
  if (d == 0.0 || sector.beamwidth_deg >= 360.0) return true;
  const double off = std::abs(angular_difference(initial_bearing(sector.center, p), sector.azimuth_deg));
  return off <= sector.beamwidth_deg / 2.0;
}

std::string_view to_string(RegionLevel level) {
  return level == RegionLevel::parish ? "parish" : "municipality";
}

RegionLevel parse_region_level(std::string_view text) {
  if (text == "parish") return RegionLevel::parish;
  if (text == "municipality") return RegionLevel::municipality;
  throw Error(Errc::invalid_input, "unknown region level '" + std::string(text) + "'");
}

void Region::validate() const {
  if (region_id.empty()) throw Error(Errc::invalid_input, "region without region_id");
  if (boundary.empty()) throw Error(Errc::invalid_input, "region " + region_id + ": empty boundary");
  for (const auto& ring : boundary) {
    if (ring.size() < 4) throw Error(Errc::invalid_input, "region " + region_id + ": ring needs >= 4 vertices");
    if (!(ring.front() == ring.back())) {
      throw Error(Errc::invalid_input, "region " + region_id + ": ring not closed");
    }
    for (const auto& v : ring) {
      if (!v.valid()) throw Error(Errc::invalid_input, "region " + region_id + ": invalid vertex");
    }
  }
  if (level == RegionLevel::parish && !parent_id) {
    throw Error(Errc::invalid_input, "parish " + region_id + " has no municipality parent");
  }
}

namespace {

bool on_segment(GeoPoint a, GeoPoint b, GeoPoint p) {
  const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  if (cross != 0.0) return false;
  return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) && p.lat >= std::min(a.lat, b.lat) &&
         p.lat <= std::max(a.lat, b.lat);
}

}  // namespace

bool polygon_contains(std::span<const Ring> rings, GeoPoint p) {
  bool inside = false;
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      const GeoPoint a = ring[i];
      const GeoPoint b = ring[i + 1];
      if (on_segment(a, b, p)) return true;
      if ((a.lat > p.lat) != (b.lat > p.lat)) {
        const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
        if (p.lon < x) inside = !inside;
      }
    }
  }
  return inside;
}

RegionIndex::RegionIndex(std::vector<Region> regions) : regions_(std::move(regions)) {
  boxes_.reserve(regions_.size());
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& r = regions_[i];
    r.validate();
    if (!by_id_.emplace(r.region_id, i).second) {
      throw Error(Errc::invalid_input, "duplicate region_id " + r.region_id);
    }
    Box box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& ring : r.boundary) {
      for (const auto& v : ring) {
        box.min_lat = std::min(box.min_lat, v.lat);
        box.min_lon = std::min(box.min_lon, v.lon);
        box.max_lat = std::max(box.max_lat, v.lat);
        box.max_lon = std::max(box.max_lon, v.lon);
      }
    }
    boxes_.push_back(box);
  }
  build_grid(RegionLevel::parish);
  build_grid(RegionLevel::municipality);
}

void RegionIndex::build_grid(RegionLevel level) {
  Grid& g = level == RegionLevel::parish ? parish_ : municipality_;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].level == level) members.push_back(i);
  }
  if (members.empty()) return;
  Box ext = boxes_[members.front()];
  for (const auto i : members) {
    ext.min_lat = std::min(ext.min_lat, boxes_[i].min_lat);
    ext.min_lon = std::min(ext.min_lon, boxes_[i].min_lon);
    ext.max_lat = std::max(ext.max_lat, boxes_[i].max_lat);
    ext.max_lon = std::max(ext.max_lon, boxes_[i].max_lon);
  }
  g.extent = ext;
  const int side = std::clamp(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(members.size())))) * 2, 1, 256);
  g.rows = side;
  g.cols = side;
  g.cells.assign(static_cast<std::size_t>(side * side), {});
  const double dlat = (ext.max_lat - ext.min_lat) / side;
  const double dlon = (ext.max_lon - ext.min_lon) / side;
  auto row_of = [&](double lat) {
    if (dlat <= 0.0) return 0;
    return std::clamp(static_cast<int>((lat - ext.min_lat) / dlat), 0, side - 1);
  };
  auto col_of = [&](double lon) {
    if (dlon <= 0.0) return 0;
    return std::clamp(static_cast<int>((lon - ext.min_lon) / dlon), 0, side - 1);
  };
  for (const auto i : members) {
    const Box& b = boxes_[i];
    // Widen by one cell on each side so points sitting exactly on a cell
    // boundary always reach every region touching it.
    const int r0 = std::max(0, row_of(b.min_lat) - 1), r1 = std::min(side - 1, row_of(b.max_lat) + 1);
    const int c0 = std::max(0, col_of(b.min_lon) - 1), c1 = std::min(side - 1, col_of(b.max_lon) + 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) g.cells[static_cast<std::size_t>(r * side + c)].push_back(i);
    }
  }
}

std::optional<std::string> RegionIndex::assign(GeoPoint p, RegionLevel level) const {
  const Grid& g = grid(level);
  if (g.cells.empty() || !g.extent.contains(p)) return std::nullopt;
  const double dlat = (g.extent.max_lat - g.extent.min_lat) / g.rows;
  const double dlon = (g.extent.max_lon - g.extent.min_lon) / g.cols;
  const int r = dlat > 0.0 ? std::clamp(static_cast<int>((p.lat - g.extent.min_lat) / dlat), 0, g.rows - 1) : 0;
  const int c = dlon > 0.0 ? std::clamp(static_cast<int>((p.lon - g.extent.min_lon) / dlon), 0, g.cols - 1) : 0;
  const std::string* best = nullptr;
  for (const auto i : g.cells[static_cast<std::size_t>(r * g.cols + c)]) {
    if (!boxes_[i].contains(p)) continue;
    const Region& region = regions_[i];
    if (best && region.region_id >= *best) continue;
    if (polygon_contains(region.boundary, p)) best = &region.region_id;
  }
  if (!best) return std::nullopt;
  return *best;
}

const Region* RegionIndex::find(std::string_view region_id) const {
  const auto it = by_id_.find(region_id);
  return it == by_id_.end() ? nullptr : &regions_[it->second];
}

std::optional<std::string> assign_region(GeoPoint p, const RegionIndex& regions, RegionLevel level) {
  return regions.assign(p, level);
}

std::optional<std::string> assign_region_brute_force(GeoPoint p, std::span<const Region> regions,
                                                     RegionLevel level) {
  std::optional<std::string> best;
  for (const auto& r : regions) {
    if (r.level != level) continue;
    if (polygon_contains(r.boundary, p) && (!best || r.region_id < *best)) best = r.region_id;
  }
  return best;
}

bool on_land(std::span<const Region> land, GeoPoint p) {
  return std::any_of(land.begin(), land.end(), [&](const Region& r) { return polygon_contains(r.boundary, p); });
}

GeoPoint sample_sector_point(const TowerSector& sector, std::uint64_t seed, std::span<const Region> land,
                             const SamplingOptions& options) {
  if (!(sector.radius_m > 0.0)) return sector.center;
  std::mt19937_64 rng(seed);
  const double half = sector.beamwidth_deg / 2.0;
  for (int attempt = 0; attempt < options.attempt_budget; ++attempt) {
    const double u_radius = 1.0 - unit_interval(rng);  // (0, 1]
    const double u_angle = unit_interval(rng);
    const double r = sector.radius_m * std::sqrt(u_radius);
    const double bearing = sector.azimuth_deg - half + sector.beamwidth_deg * u_angle;
    const GeoPoint q = destination_point(sector.center, bearing, r);
    // Rounding can push a draw at the wedge edge a hair outside; such draws
    // are rejected like off-land ones so the containment contract is exact.
    if (!sector_contains(sector, q)) continue;
    if (land.empty() || on_land(land, q)) return q;
  }
  if (land.empty() || on_land(land, sector.center)) return sector.center;
  throw Error(Errc::clipping_exhausted, "no land point found in sector " + sector.cell_id + " after " +
                                            std::to_string(options.attempt_budget) + " attempts");
}

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

std::uint64_t event_seed(std::string_view cell_id, std::string_view user_id, Timestamp t) {
  std::string key;
  key.reserve(cell_id.size() + user_id.size() + 10);
  key.append(cell_id);
  key.push_back('\0');
  key.append(user_id);
  key.push_back('\0');
  auto ut = static_cast<std::uint64_t>(t);
  for (int i = 0; i < 8; ++i) {
    key.push_back(static_cast<char>(ut & 0xff));
    ut >>= 8;
  }
  return stable_hash(key);
}

TowerTable make_tower_table(std::vector<TowerSector> towers) {
  TowerTable table;
  for (auto& t : towers) {
    t.validate();
    const auto id = t.cell_id;
    if (!table.emplace(id, std::move(t)).second) throw Error(Errc::invalid_input, "duplicate cell_id " + id);
  }
  return table;
}

namespace {

PositionedEvent position_one(const CdrEvent& e, const TowerTable& towers, std::span<const Region> land,
                             const SamplingOptions& options) {
  const auto it = towers.find(e.cell_id);
  if (it == towers.end()) throw Error(Errc::invalid_input, "event references unknown cell " + e.cell_id);
  return {e.user_id, e.timestamp, e.cell_id,
          sample_sector_point(it->second, event_seed(e.cell_id, e.user_id, e.timestamp), land, options)};
}

}  // namespace

std::vector<PositionedEvent> position_events_serial(std::span<const CdrEvent> events, const TowerTable& towers,
                                                    std::span<const Region> land, const SamplingOptions& options) {
  std::vector<PositionedEvent> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(position_one(e, towers, land, options));
  return out;
}

std::vector<PositionedEvent> position_events(std::span<const CdrEvent> events, const TowerTable& towers,
                                             std::span<const Region> land, const SamplingOptions& options) {
  std::vector<PositionedEvent> out(events.size());
  const auto n = static_cast<std::int64_t>(events.size());
  std::int64_t failed_at = n;
#pragma omp parallel for schedule(static) reduction(min : failed_at)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& e = events[static_cast<std::size_t>(i)];
    if (towers.find(e.cell_id) == towers.end()) {
      failed_at = std::min(failed_at, i);
      continue;
    }
    try {
      out[static_cast<std::size_t>(i)] = position_one(e, towers, land, options);
    } catch (const Error&) {
      failed_at = std::min(failed_at, i);
    }
  }
  // Rethrow the first failure in input order, exactly as the serial path would.
  if (failed_at < n) position_one(events[static_cast<std::size_t>(failed_at)], towers, land, options);
  return out;
}

}  // namespace cdrpm
