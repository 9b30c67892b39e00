#include <filesystem>
#include <fstream>

#include "cdrpm/error.hpp"
#include "cdrpm/io.hpp"
#include "cdrpm/pipeline.hpp"
#include "doctest.h"

using namespace cdrpm;
namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io_error;
}

std::string message_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cdrpm_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

PipelineConfig small_run(const fs::path& out) {
  PipelineConfig c;
  c.out = out;
  c.synth.n_agents = 6;
  c.synth.n_days = 3;
  c.log_level = LogLevel::error;
  return c;
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("default INI parses back to the defaults") {
    const PipelineConfig parsed = parse_config(default_config_ini(), "/base", "defaults");
    CHECK(parsed.hash() == PipelineConfig{}.hash());
    CHECK(parsed.canonical() == PipelineConfig{}.canonical());
  }

  TEST_CASE("settings are read and paths resolve against the file") {
    const PipelineConfig c = parse_config(
        "[paths]\ncdr = in/cdr.csv\ntowers = /abs/towers.csv\n[stays]\nr1_m = 250\n[log]\nlevel = parish\n"
        "[synth]\nmode_mix = walk:0.5,car:0.5\nspeed_car = 30:50\n[run]\nthreads = 2\n",
        "/base", "mem");
    CHECK(*c.cdr == fs::path("/base/in/cdr.csv"));
    CHECK(*c.towers == fs::path("/abs/towers.csv"));
    CHECK(c.stops.r1_m == 250);
    CHECK(c.level == RegionLevel::parish);
    CHECK(c.synth.mode_mix.size() == 2);
    CHECK(c.synth.speed_bands.at(Mode::car).lo_kmh == 30);
    CHECK(c.threads == 2);
  }

  TEST_CASE("config errors") {
    CHECK(code_of([] { parse_config("[stays]\nr9 = 1\n", ".", "m"); }) == Errc::invalid_config);
    CHECK(code_of([] { parse_config("[nowhere]\nx = 1\n", ".", "m"); }) == Errc::invalid_config);
    CHECK(code_of([] { parse_config("[stays]\nr1_m = wide\n", ".", "m"); }) == Errc::invalid_config);
    CHECK(code_of([] { parse_config("[stays]\nr1_m = -3\n", ".", "m"); }) == Errc::invalid_config);
    CHECK(code_of([] { parse_config("[log]\nlevel = county\n", ".", "m"); }) == Errc::invalid_config);
    CHECK(code_of([] { parse_config("this is not ini [", ".", "m"); }) == Errc::invalid_config);
    CHECK(message_of([] { parse_config("[stays]\nr9 = 1\n", ".", "m"); }).find("r9") != std::string::npos);
    CHECK(code_of([] { load_config("/nonexistent/cdrpm.ini"); }) == Errc::io_error);
  }

  TEST_CASE("hash follows the settings that shape artifacts") {
    PipelineConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.stops.r1_m = 301;
    CHECK(a.hash() != b.hash());
    PipelineConfig c;
    c.log_level = LogLevel::debug;
    c.threads = 3;
    CHECK(a.hash() == c.hash());
  }

  TEST_CASE("running stage by stage equals running everything") {
    const fs::path one = scratch("all"), two = scratch("stages");
    run_all(small_run(one));
    const PipelineConfig c = small_run(two);
    for (const Stage s : kAllStages) run_stage(s, c);
    const auto a = artifacts(one), b = artifacts(two);
    CHECK(a.size() == b.size());
    for (const auto& [name, content] : a) {
      INFO(name);
      REQUIRE(b.count(name));
      CHECK(b.at(name) == content);
    }
    for (const Stage s : kAllStages) {
      for (const auto& name : stage_outputs(s, c)) CHECK(a.count(name));
    }
    fs::remove_all(one);
    fs::remove_all(two);
  }

  TEST_CASE("run directory guards") {
    const fs::path dir = scratch("guards");
    const PipelineConfig c = small_run(dir);
    CHECK(code_of([&] { run_stage(Stage::conform, c); }) == Errc::dependency_missing);
    CHECK(message_of([&] { run_stage(Stage::conform, c); }).find("discover") != std::string::npos);
    run_stage(Stage::synth, c);
    CHECK(code_of([&] { run_stage(Stage::synth, c); }) == Errc::invalid_config);
    CHECK_NOTHROW(run_stage(Stage::synth, c, {.force = true}));
    PipelineConfig other = c;
    other.stops.r1_m = 200;
    CHECK(code_of([&] { run_stage(Stage::position, other); }) == Errc::invalid_config);
    fs::remove_all(dir);
  }

  TEST_CASE("missing external input names the path") {
    const fs::path dir = scratch("missing");
    PipelineConfig c = small_run(dir);
    c.cdr = dir / "nope" / "cdr.csv";
    c.towers = dir / "nope" / "towers.csv";
    c.regions = dir / "nope" / "regions.geojson";
    CHECK(code_of([&] { run_stage(Stage::position, c); }) == Errc::io_error);
    const std::string msg = message_of([&] { run_stage(Stage::position, c); });
    CHECK(msg.find("nope") != std::string::npos);
    CHECK(msg.find("position") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("log level names") {
    CHECK(parse_log_level("debug") == LogLevel::debug);
    CHECK(to_string(LogLevel::warn) == "warn");
    CHECK_THROWS_AS(parse_log_level("loud"), Error);
  }
}
