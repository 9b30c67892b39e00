#pragma once

// Seeded synthetic scenarios: a grid of tower sectors over a grid of regions,
// agents moving between anchor locations, and the ground truth needed to
// score the pipeline against what actually happened.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cdrpm/geo.hpp"
#include "cdrpm/stays.hpp"
#include "cdrpm/trips.hpp"
#include "cdrpm/validation.hpp"

namespace cdrpm {

/// mt19937_64 with hand-rolled draws so sequences match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }
  double exponential(double rate);
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn with probability proportional to `weights`.
  std::size_t weighted(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

struct SpeedBand {
  double lo_kmh = 0.0;
  double hi_kmh = 0.0;
};

inline constexpr Mode kTravelModes[] = {Mode::walk, Mode::bicycle, Mode::bus, Mode::car, Mode::train};

struct ScenarioConfig {
  std::size_t n_agents = 100;
  std::size_t n_days = 14;
  Timestamp epoch = 1706745600;  // 2024-02-01T00:00:00Z
  std::uint64_t seed = 1;

  // Towers: rows x cols grid, each tower split into equal sectors.
  std::size_t tower_rows = 12;
  std::size_t tower_cols = 12;
  double tower_spacing_m = 1000.0;
  double sector_radius_m = 120.0;
  std::size_t sectors_per_tower = 3;
  GeoPoint origin{38.66, -9.36};  // south-west corner of the grid

  // Regions: a parish covers parish_towers x parish_towers towers, a
  // municipality covers municipality_parishes x municipality_parishes parishes.
  std::size_t parish_towers = 2;
  std::size_t municipality_parishes = 2;

  // Daily activity.
  std::size_t trips_per_day_min = 2;
  std::size_t trips_per_day_max = 4;
  std::size_t other_anchors = 2;
  double min_anchor_separation_m = 4000.0;
  Timestamp day_start_s = 7 * 3600;
  Timestamp day_start_jitter_s = 3600;
  Timestamp min_dwell_s = 45 * 60;
  Timestamp dwell_jitter_s = 2 * 3600;
  double transfer_prob = 0.1;
  Timestamp transfer_dwell_s = 12 * 60;
  double min_transfer_leg_m = 1500.0;

  std::map<Mode, double> mode_mix{
      {Mode::walk, 0.15}, {Mode::bicycle, 0.05}, {Mode::bus, 0.35}, {Mode::car, 0.35}, {Mode::train, 0.10}};
  std::map<Mode, SpeedBand> speed_bands{{Mode::walk, {2.0, 7.0}},
                                        {Mode::bicycle, {7.0, 15.0}},
                                        {Mode::bus, {15.0, 45.0}},
                                        {Mode::car, {27.0, 60.0}},
                                        {Mode::train, {45.0, 120.0}}};
  /// 0 puts every leg at the centre of its mode band; 1 spreads speeds over
  /// the whole range that still classifies as the planted mode.
  double speed_jitter = 0.0;
  ModeThresholds thresholds;

  double dwell_pings_per_hour = 4.0;
  double moving_pings_per_hour = 2.0;
  /// Probability that a ping is served by the second-nearest tower.
  double noise = 0.0;

  void validate() const;
};

/// Speed whose classification survives the widest symmetric scaling of speed
/// and length together, capped at `max_window`; ties go to the band centre.
struct RobustSpeed {
  double speed_kmh = 0.0;
  double window = 0.0;  // label holds for factors in [1/window, window]
};
RobustSpeed robust_speed(Mode mode, double length_m, SpeedBand band, const ModeThresholds& thresholds,
                         double max_window = 1.5);

enum class AnchorKind { home, work, other, transfer };
std::string_view to_string(AnchorKind kind);

struct TrueStaypoint {
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  GeoPoint location;
  AnchorKind kind = AnchorKind::home;
  std::string parish;
  std::string municipality;
};

struct TrueLeg {
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  Mode mode = Mode::unknown;
  double length_m = 0.0;  // straight line between the endpoints
  double speed_kmh = 0.0;
};

struct TrueTrip {
  std::size_t origin = 0;       // index into the agent's staypoints
  std::size_t destination = 0;  // index into the agent's staypoints
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::vector<TrueLeg> legs;
};

struct Anchor {
  AnchorKind kind = AnchorKind::home;
  GeoPoint location;
  std::string cell_id;
};

struct AgentTruth {
  std::string user_id;
  std::vector<Anchor> anchors;
  std::vector<TrueStaypoint> staypoints;  // dwells, chronological
  std::vector<TrueTrip> trips;            // chronological
};

struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<AgentTruth> agents;
  std::size_t trip_count() const;
  std::size_t staypoint_count() const;
};

struct Scenario {
  std::vector<CdrEvent> events;  // sorted by (user_id, timestamp)
  std::vector<TowerSector> towers;
  std::vector<Region> regions;
  GroundTruth truth;
};

/// Throws Errc::invalid_config on a bad config.
Scenario generate_scenario(const ScenarioConfig& config);

/// Nearest towers to a point in a generated tower grid.
class TowerGrid {
 public:
  explicit TowerGrid(const ScenarioConfig& config);
  const std::vector<TowerSector>& sectors() const { return sectors_; }
  /// Tower index of the k-th nearest tower (k = 0 or 1), ties to the lower index.
  std::size_t nearest_tower(GeoPoint p, std::size_t k = 0) const;
  /// Sector of `tower` whose wedge faces `p`.
  const TowerSector& sector_toward(std::size_t tower, GeoPoint p) const;
  GeoPoint tower_center(std::size_t tower) const { return sectors_[tower * per_tower_].center; }
  std::size_t tower_count() const { return rows_ * cols_; }

 private:
  std::size_t rows_, cols_, per_tower_;
  double spacing_, m_per_deg_lat_, m_per_deg_lon_;
  GeoPoint origin_;
  std::vector<TowerSector> sectors_;
};

struct RecoveryReport {
  std::size_t true_staypoints = 0;
  std::size_t detected_staypoints = 0;
  std::size_t matched_staypoints = 0;
  double precision = 1.0;
  double recall = 0.0;
  bool precision_vacuous = false;  // no detections

  std::size_t true_trips = 0;
  std::size_t detected_trips = 0;
  double trip_count_deviation = 0.0;  // (detected - true) / true

  double od_agreement = 0.0;  // sum of cellwise min over the larger total

  std::size_t matched_legs = 0;
  double mode_accuracy = 1.0;
  std::map<Mode, std::map<Mode, std::size_t>> mode_confusion;  // truth -> detected
};

/// Staypoints match when they belong to the same user, overlap in time by at
/// least half the shorter interval, and the detected median lies within r1_m
/// of the true location. Matching is one-to-one. Throws Errc::scenario_mismatch
/// when detections name users the truth does not know.
RecoveryReport score_recovery(const GroundTruth& truth, std::span<const Staypoint> staypoints,
                              std::span<const Trip> trips, double r1_m);

/// Municipality-to-municipality trip counts from the ground truth, each scaled
/// by a seeded factor in [1 - spread, 1 + spread] and rounded, standing in for
/// a travel survey. Sorted by (origin, destination) name.
std::vector<SurveyPair> survey_from_truth(const GroundTruth& truth, std::span<const Region> regions,
                                          std::uint64_t seed, double spread = 0.15);
std::string write_survey_pairs(std::span<const SurveyPair> pairs);

std::string write_ground_truth(const GroundTruth& truth);
GroundTruth parse_ground_truth(std::string_view json, const std::string& source);
GroundTruth read_ground_truth(const std::filesystem::path& path);
std::string write_recovery_json(const RecoveryReport& report);

}  // namespace cdrpm
