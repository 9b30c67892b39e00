#pragma once

// Case-centric and object-centric event logs built from trips.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cdrpm/geo.hpp"
#include "cdrpm/stays.hpp"
#include "cdrpm/trips.hpp"

namespace cdrpm {

struct LogEvent {
  std::string activity;
  Timestamp timestamp = 0;
  friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

struct Trace {
  std::string case_id;
  std::vector<LogEvent> events;

  std::vector<std::string> activities() const;
  Timestamp duration() const { return events.empty() ? 0 : events.back().timestamp - events.front().timestamp; }
  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Multiset of traces; one trace per case.
struct CaseLog {
  std::vector<Trace> traces;

  /// Non-empty traces with nondecreasing timestamps; throws Errc::invalid_input.
  void validate() const;
  std::set<std::string> alphabet() const;
  std::size_t event_count() const;
  friend bool operator==(const CaseLog&, const CaseLog&) = default;
};

struct OcelRelation {
  std::string object_id;
  std::string qualifier;  // "trip" or "mode" for logs built here
  friend bool operator==(const OcelRelation&, const OcelRelation&) = default;
};

struct OcelEvent {
  std::string id;
  std::string activity;
  Timestamp timestamp = 0;
  std::vector<OcelRelation> relations;
  friend bool operator==(const OcelEvent&, const OcelEvent&) = default;
};

struct OcelObject {
  std::string id;
  std::string type;
  friend bool operator==(const OcelObject&, const OcelObject&) = default;
};

struct Ocel {
  std::vector<std::string> object_types;
  std::vector<OcelObject> objects;
  std::vector<OcelEvent> events;

  /// Sorts every array by id (relations by object id, then qualifier).
  void canonicalize();
  /// Unique ids, total typing function, relations referencing known objects.
  void validate() const;
  std::size_t relation_count() const;
  friend bool operator==(const Ocel&, const Ocel&) = default;
};

inline constexpr std::string_view kModeObjectType = "Mode";

struct DroppedTrip {
  std::string trip_id;
  std::string staypoint_id;
  std::string reason;
};

struct CaseLogBuild {
  CaseLog log;
  std::vector<DroppedTrip> dropped;
};

struct OcelBuild {
  Ocel ocel;
  std::vector<DroppedTrip> dropped;
};

/// One trace per trip (trip_id order) with an event per endpoint and per
/// intermediate staypoint whose region differs from the previous event.
/// Activities are region names at `level`. Trips with an unresolved endpoint
/// are reported in `dropped`.
CaseLogBuild build_case_log(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                            const RegionIndex& regions, RegionLevel level);

/// Same events as build_case_log, ids `e<case>_<event>`. Objects: one per trip
/// typed by its primary mode, plus one singleton per mode (type "Mode").
/// Every event relates to its trip and its mode object.
OcelBuild build_ocel(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                     const RegionIndex& regions, RegionLevel level);

struct LogStats {
  std::size_t n_cases_or_objects = 0;
  std::size_t n_events = 0;
  std::size_t n_variants_or_object_types = 0;
  std::optional<std::size_t> n_relations;
  friend bool operator==(const LogStats&, const LogStats&) = default;
};

LogStats compute_stats(const CaseLog& log);
LogStats compute_stats(const Ocel& ocel);

/// case_id,activity,timestamp sorted by (case_id, timestamp).
std::string write_case_log(const CaseLog& log);
CaseLog read_case_log(const std::filesystem::path& path);
CaseLog parse_case_log(std::string_view csv_text, const std::string& source);

std::string write_ocel(const Ocel& ocel);
Ocel parse_ocel(std::string_view json_text, const std::string& source);
Ocel read_ocel(const std::filesystem::path& path);

std::string write_dropped(std::span<const DroppedTrip> dropped);
std::string write_stats_json(const LogStats& case_stats, const std::optional<LogStats>& ocel_stats);

}  // namespace cdrpm
