#pragma once

// Geodesy on a spherical Earth, antenna sector geometry and administrative
// region lookup.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrpm/io.hpp"

namespace cdrpm {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
  double lat = 0.0;  // decimal degrees WGS84
  double lon = 0.0;

  bool valid() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Great-circle distance in meters.
double haversine_distance(GeoPoint a, GeoPoint b);

/// Initial bearing from `from` to `to`, degrees clockwise from north in [0, 360).
double initial_bearing(GeoPoint from, GeoPoint to);

/// Point reached by travelling `distance_m` from `origin` along `bearing_deg`.
GeoPoint destination_point(GeoPoint origin, double bearing_deg, double distance_m);

double normalize_azimuth(double deg);
/// Signed difference a - b folded into (-180, 180].
double angular_difference(double a, double b);

struct TowerSector {
  std::string cell_id;
  GeoPoint center;
  double azimuth_deg = 0.0;
  double beamwidth_deg = 360.0;
  double radius_m = 1.0;

  /// Throws Errc::invalid_input. Normalizes the azimuth in place.
  void validate();
};

/// Wedge membership: distance <= radius and bearing within
/// [azimuth - beamwidth/2, azimuth + beamwidth/2]. The apex itself is inside.
bool sector_contains(const TowerSector& sector, GeoPoint p);

enum class RegionLevel { parish, municipality };

std::string_view to_string(RegionLevel level);
RegionLevel parse_region_level(std::string_view text);

using Ring = std::vector<GeoPoint>;

struct Region {
  std::string region_id;
  std::string name;
  RegionLevel level = RegionLevel::municipality;
  std::optional<std::string> parent_id;
  std::vector<Ring> boundary;  // closed rings, even-odd fill

  void validate() const;
};

/// Even-odd ray casting in (lon, lat) plane. Points on an edge are inside.
bool polygon_contains(std::span<const Ring> rings, GeoPoint p);

/// Immutable bucket-grid index over region bounding boxes, one grid per level.
class RegionIndex {
 public:
  RegionIndex() = default;
  explicit RegionIndex(std::vector<Region> regions);

  /// Containing region id; on shared boundaries the smallest id wins.
  std::optional<std::string> assign(GeoPoint p, RegionLevel level) const;

  const Region* find(std::string_view region_id) const;
  std::span<const Region> regions() const { return regions_; }
  bool empty() const { return regions_.empty(); }

 private:
  struct Box {
    double min_lat, min_lon, max_lat, max_lon;
    bool contains(GeoPoint p) const {
      return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
  };
  struct Grid {
    Box extent{};
    int rows = 0;
    int cols = 0;
    std::vector<std::vector<std::size_t>> cells;
  };

  void build_grid(RegionLevel level);
  const Grid& grid(RegionLevel level) const { return level == RegionLevel::parish ? parish_ : municipality_; }

  std::vector<Region> regions_;
  std::vector<Box> boxes_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  Grid parish_;
  Grid municipality_;
};

std::optional<std::string> assign_region(GeoPoint p, const RegionIndex& regions, RegionLevel level);

/// Linear scan over every region; reference for the indexed lookup.
std::optional<std::string> assign_region_brute_force(GeoPoint p, std::span<const Region> regions,
                                                     RegionLevel level);

struct SamplingOptions {
  int attempt_budget = 64;
};

/// Deterministic pseudo-location inside a sector wedge, uniform over area.
/// With a non-empty `land` mask the point is resampled until it falls on land;
/// after the budget the sector center is used if it is on land, otherwise
/// Errc::clipping_exhausted is thrown.
GeoPoint sample_sector_point(const TowerSector& sector, std::uint64_t seed, std::span<const Region> land,
                             const SamplingOptions& options = {});

bool on_land(std::span<const Region> land, GeoPoint p);

/// FNV-1a with a final avalanche step. Stable across platforms and runs.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t event_seed(std::string_view cell_id, std::string_view user_id, Timestamp t);

// ---------------------------------------------------------------------------
// Positioning

struct CdrEvent {
  std::string user_id;
  Timestamp timestamp = 0;
  std::string cell_id;

  friend bool operator==(const CdrEvent&, const CdrEvent&) = default;
};

struct PositionedEvent {
  std::string user_id;
  Timestamp timestamp = 0;
  std::string cell_id;
  GeoPoint location;

  friend bool operator==(const PositionedEvent&, const PositionedEvent&) = default;
};

using TowerTable = std::map<std::string, TowerSector, std::less<>>;

TowerTable make_tower_table(std::vector<TowerSector> towers);

/// Positions every event inside its serving sector (OpenMP over events).
/// Output order equals input order. Unknown cells raise Errc::invalid_input.
std::vector<PositionedEvent> position_events(std::span<const CdrEvent> events, const TowerTable& towers,
                                             std::span<const Region> land, const SamplingOptions& options = {});
std::vector<PositionedEvent> position_events_serial(std::span<const CdrEvent> events, const TowerTable& towers,
                                                    std::span<const Region> land,
                                                    const SamplingOptions& options = {});

// ---------------------------------------------------------------------------
// File formats

std::vector<TowerSector> read_towers(const std::filesystem::path& path);
std::string write_towers(std::span<const TowerSector> towers);

/// GeoJSON FeatureCollection of Polygon / MultiPolygon features.
std::vector<Region> read_regions(const std::filesystem::path& path);
std::vector<Region> parse_regions(std::string_view geojson, const std::string& source);
std::string write_regions(std::span<const Region> regions);

std::vector<CdrEvent> read_cdr(const std::filesystem::path& path);
std::string write_cdr(std::span<const CdrEvent> events);

std::vector<PositionedEvent> read_positioned(const std::filesystem::path& path);
std::string write_positioned(std::span<const PositionedEvent> events);

}  // namespace cdrpm
