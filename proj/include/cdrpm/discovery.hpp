#pragma once

// Directly-follows graphs over case logs and object-centric logs, variant
// analysis, and DOT / JSON export.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdrpm/event_log.hpp"

namespace cdrpm {

struct ArcStats {
  std::size_t frequency = 0;
  std::optional<double> mean_s;    // set by annotate_durations
  std::optional<double> median_s;
  std::size_t n_samples = 0;
  friend bool operator==(const ArcStats&, const ArcStats&) = default;
};

using ArcKey = std::pair<std::string, std::string>;

struct Dfg {
  std::map<std::string, std::size_t> nodes;  // activity -> event count
  std::map<ArcKey, ArcStats> arcs;
  std::map<std::string, std::size_t> start_counts;
  std::map<std::string, std::size_t> end_counts;

  std::size_t trace_count() const;
  friend bool operator==(const Dfg&, const Dfg&) = default;
};

/// Frequencies only. Throws Errc::empty_log.
Dfg discover_dfg(const CaseLog& log);  // OpenMP over traces
Dfg discover_dfg_serial(const CaseLog& log);

/// Mean / median of t(b) - t(a) over every adjacent pair. Throws
/// Errc::mismatched_log when the log has pairs (or counts) the model lacks.
Dfg annotate_durations(Dfg dfg, const CaseLog& log);
Dfg annotate_durations_serial(Dfg dfg, const CaseLog& log);

struct Variant {
  std::vector<std::string> activities;
  std::size_t count = 0;
  double mean_duration_s = 0.0;
  friend bool operator==(const Variant&, const Variant&) = default;
};

/// Ordered by count descending, then activity sequence. Throws Errc::empty_log.
std::vector<Variant> extract_variants(const CaseLog& log, std::optional<std::size_t> top_k = std::nullopt);

struct FilterOptions {
  /// When the selection matches no trace: false raises Errc::empty_selection,
  /// true returns an empty log with `empty` set.
  bool allow_empty_result = false;
};

struct FilterResult {
  CaseLog log;
  bool empty = false;
};

FilterResult filter_log_by_variants(const CaseLog& log, std::span<const std::vector<std::string>> selection,
                                    const FilterOptions& options = {});

struct OcDfg {
  std::set<std::string> nodes;
  std::map<std::string, Dfg> per_type;  // object type -> annotated DFG
  friend bool operator==(const OcDfg&, const OcDfg&) = default;
};

/// Per type, each object's events ordered by (timestamp, natural id order)
/// form one trace of the flattened log.
CaseLog flatten_ocel(const Ocel& ocel, std::string_view object_type);

/// Annotated per-type DFGs over the flattened logs. Throws Errc::empty_log.
OcDfg discover_ocdfg(const Ocel& ocel);

/// Numeric runs compare by value: "e2_1" < "e10_0".
bool natural_less(std::string_view a, std::string_view b);

struct DotOptions {
  bool show_frequency = true;
  bool show_duration = false;
  std::size_t min_arc_frequency = 0;
  std::set<std::string> exclude_types;  // OC-DFG only
};

std::string export_dot(const Dfg& dfg, const DotOptions& options = {});
std::string export_dot(const OcDfg& model, const DotOptions& options = {});

std::string export_json(const Dfg& dfg);
std::string export_json(const OcDfg& model);
Dfg parse_dfg_json(std::string_view text, const std::string& source);
Dfg read_dfg_json(const std::filesystem::path& path);

/// rank,count,mean_duration_s,variant (activities joined with " -> ")
std::string write_variants(std::span<const Variant> variants);

}  // namespace cdrpm
