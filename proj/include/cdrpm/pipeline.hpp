#pragma once

// Stage orchestration for the command-line tool: configuration, run
// directories and the artifact files each stage reads and writes.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdrpm/geo.hpp"
#include "cdrpm/stays.hpp"
#include "cdrpm/synth.hpp"
#include "cdrpm/trips.hpp"

namespace cdrpm {

enum class LogLevel { error, warn, info, debug };
std::string_view to_string(LogLevel level);
LogLevel parse_log_level(std::string_view text);

enum class Stage { synth, position, stays, trips, log, discover, conform, validate };
inline constexpr Stage kAllStages[] = {Stage::synth, Stage::position, Stage::stays,   Stage::trips,
                                       Stage::log,   Stage::discover, Stage::conform, Stage::validate};
std::string_view to_string(Stage stage);

struct PipelineConfig {
  // External inputs. When cdr is unset the synth stage supplies cdr, towers
  // and regions inside the run directory.
  std::optional<std::filesystem::path> cdr;
  std::optional<std::filesystem::path> towers;
  std::optional<std::filesystem::path> regions;
  std::optional<std::filesystem::path> survey;
  std::optional<std::filesystem::path> aliases;
  std::filesystem::path out = "run";

  StopParams stops;
  ModeThresholds modes;
  Timestamp gap_threshold_s = kDefaultTripGapS;
  RegionLevel level = RegionLevel::municipality;
  bool ocel = true;
  std::size_t top_k = 20;
  std::size_t min_arc_frequency = 1;
  std::optional<std::string> survey_origin;
  ScenarioConfig synth;

  LogLevel log_level = LogLevel::info;
  int threads = 0;  // 0: OpenMP default

  /// Throws Errc::invalid_config naming the offending field.
  void validate() const;
  /// Every setting that shapes an artifact, one `key = value` per line.
  std::string canonical() const;
  std::string hash() const;
};

/// INI file with sections [paths] [stays] [trips] [modes] [log] [discover]
/// [validate] [synth] [run]. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view ini, const std::filesystem::path& base_dir, const std::string& source);
/// The defaults written out as an INI file.
std::string default_config_ini();

struct RunOptions {
  bool force = false;  // overwrite existing artifacts
};

/// Artifact names a stage writes into the run directory.
std::vector<std::string> stage_outputs(Stage stage, const PipelineConfig& config);

/// Runs one stage. Missing external inputs raise Errc::io_error; missing
/// artifacts of earlier stages raise Errc::dependency_missing. Errors carry the
/// stage name.
void run_stage(Stage stage, const PipelineConfig& config, const RunOptions& options = {});
/// Every stage in order; synth only when no cdr input is configured.
void run_all(const PipelineConfig& config, const RunOptions& options = {});

void set_log_level(LogLevel level);
void log_message(LogLevel level, std::string_view stage, std::string_view message);

}  // namespace cdrpm
