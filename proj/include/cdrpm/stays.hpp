#pragma once

// Staypoint extraction: temporal stop grouping per user followed by spatial
// clustering of stop medians into shared destinations.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrpm/geo.hpp"

namespace cdrpm {

struct StopParams {
  double r1_m = 300.0;              // max roaming radius within a stop
  double r2_m = 500.0;              // max distance linking stop medians
  Timestamp min_duration_s = 600;
  Timestamp max_gap_s = 3600;       // max silence inside one stop

  void validate() const;
  /// r2 < r1 is legal but usually a configuration mistake.
  bool suspicious() const { return r2_m < r1_m; }
};

struct Stop {
  std::string user_id;
  GeoPoint median;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::size_t n_events = 0;
  std::size_t first_event = 0;  // index into the user's trace
  friend bool operator==(const Stop&, const Stop&) = default;
};

struct Staypoint {
  std::string staypoint_id;
  std::string user_id;
  std::string location_id;
  GeoPoint median;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::optional<std::string> region_parish;
  std::optional<std::string> region_municipality;

  const std::optional<std::string>& region(RegionLevel level) const {
    return level == RegionLevel::parish ? region_parish : region_municipality;
  }
  friend bool operator==(const Staypoint&, const Staypoint&) = default;
};

/// Component-wise median; even counts average the two middle values.
GeoPoint componentwise_median(std::span<const GeoPoint> points);

/// Greedy scan over one user's time-ordered trace. An event joins the open
/// stop while it is within max_gap of its predecessor, within r1 of the
/// current median, and every member stays within r1 of the updated median.
/// Throws Errc::unsorted_input on decreasing timestamps.
std::vector<Stop> detect_stops(std::span<const PositionedEvent> trace, const StopParams& params);

/// Splits events by user (stable) and runs detect_stops per user with OpenMP.
/// Result is ordered by user_id, then time.
std::vector<Stop> detect_stops_all(std::span<const PositionedEvent> events, const StopParams& params);
std::vector<Stop> detect_stops_all_serial(std::span<const PositionedEvent> events, const StopParams& params);

/// Strategy for grouping stop medians into destinations. Implementations
/// return an arbitrary component id per stop; cluster_destinations renames
/// them canonically.
class DestinationLabeler {
 public:
  virtual ~DestinationLabeler() = default;
  virtual std::vector<std::size_t> components(std::span<const Stop> stops, double r2_m) const = 0;
};

/// Connected components of the graph linking medians at distance <= r2.
/// Candidate pairs come from a lat/lon bucket grid scanned in parallel.
class ThresholdGraphLabeler final : public DestinationLabeler {
 public:
  std::vector<std::size_t> components(std::span<const Stop> stops, double r2_m) const override;
};

/// Same graph, all pairs, single thread.
class BruteForceThresholdLabeler final : public DestinationLabeler {
 public:
  std::vector<std::size_t> components(std::span<const Stop> stops, double r2_m) const override;
};

/// location_id per stop ("L0", "L1", ...). The component holding the stop
/// with the earliest t_start (ties: user_id, then input position) is "L0".
std::vector<std::string> cluster_destinations(std::span<const Stop> stops, double r2_m,
                                              const DestinationLabeler& labeler = ThresholdGraphLabeler{});

/// detect_stops per user, cluster_destinations globally, region lookup at
/// both levels. Output sorted by (user_id, t_start); ids "sp000001", ...
std::vector<Staypoint> build_staypoints(std::span<const PositionedEvent> events, const StopParams& params,
                                        const RegionIndex& regions,
                                        const DestinationLabeler& labeler = ThresholdGraphLabeler{});

std::vector<Staypoint> read_staypoints(const std::filesystem::path& path);
std::string write_staypoints(std::span<const Staypoint> staypoints);

}  // namespace cdrpm
