#pragma once

// Origin-destination aggregation and comparison against survey figures.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdrpm/event_log.hpp"
#include "cdrpm/geo.hpp"
#include "cdrpm/stays.hpp"
#include "cdrpm/trips.hpp"

namespace cdrpm {

struct OdMatrix {
  RegionLevel level = RegionLevel::municipality;
  std::map<std::pair<std::string, std::string>, std::size_t> counts;  // region names
  std::size_t total = 0;
  friend bool operator==(const OdMatrix&, const OdMatrix&) = default;
};

struct OdBuild {
  OdMatrix od;
  std::vector<DroppedTrip> dropped;
};

/// One count per trip at (origin region, destination region); trips whose
/// endpoints have no region at `level` land in `dropped`.
OdBuild build_od_matrix(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                        const RegionIndex& regions, RegionLevel level);
/// Same aggregation split over OpenMP threads and merged.
OdBuild build_od_matrix_parallel(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                                 const RegionIndex& regions, RegionLevel level);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  double r_squared = 0.0;
  std::optional<double> p_value;  // two-sided, slope t-test with n-2 df; absent when n < 3
  std::size_t n = 0;
  bool y_constant = false;  // r reported as 0
};

/// Ordinary least squares of y on x. Throws Errc::degenerate_input when
/// n < 2, sizes differ, or x is constant.
RegressionResult linear_regression(std::span<const double> x, std::span<const double> y);

/// Region-name aliases, e.g. survey names from older boundary definitions.
using AliasMap = std::map<std::string, std::string, std::less<>>;

struct ShareClassRow {
  std::string name;
  double survey_share = 0.0;
  double measured_share = 0.0;
  std::size_t measured_trips = 0;
  double deviation_pp = 0.0;        // percentage points, measured - survey
  double relative_deviation = 0.0;  // (measured - survey) / survey
};

struct SurveyPair {
  std::string origin;
  std::string destination;
  double trips = 0.0;
};

struct PairedFlow {
  std::string origin;
  std::string destination;
  double survey = 0.0;
  double measured = 0.0;
};

struct ShareOptions {
  std::optional<std::string> origin;  // restrict to trips leaving this region
  AliasMap aliases;
};

struct ShareComparison {
  std::vector<ShareClassRow> classes;
  std::size_t total = 0;
  std::optional<std::string> origin;
  // Filled when pairwise survey counts are supplied.
  std::vector<PairedFlow> pairs;
  std::optional<RegressionResult> regression;
  std::optional<RegressionResult> regression_without_outlier;
  std::optional<PairedFlow> outlier;  // largest absolute residual
};

/// Classes: "intra" (origin == destination), a destination region name, or
/// "other" for everything not named. Throws Errc::class_mismatch when shares
/// do not sum to 1 (+-1e-6), a class repeats, or some destination falls in no class.
ShareComparison compare_shares(const OdMatrix& od, std::span<const std::pair<std::string, double>> survey,
                               const ShareOptions& options = {},
                               std::span<const SurveyPair> survey_pairs = {});

/// Regresses measured counts on survey counts for the supplied pairs, with and
/// without the largest-residual pair.
void regress_pairs(const OdMatrix& od, std::span<const SurveyPair> survey_pairs, const AliasMap& aliases,
                   ShareComparison& into);

struct SurveyFile {
  std::vector<std::pair<std::string, double>> shares;
  std::vector<SurveyPair> pairs;
};

/// `class,share` or `origin,destination,trips`.
SurveyFile read_survey(const std::filesystem::path& path);
AliasMap read_aliases(const std::filesystem::path& path);

std::string write_od_matrix(const OdMatrix& od);
std::string write_validation_json(const ShareComparison& comparison);
std::string regression_json(const RegressionResult& r);

}  // namespace cdrpm
