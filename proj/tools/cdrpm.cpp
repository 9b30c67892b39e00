// Command-line front end: one subcommand per pipeline stage, plus `all`.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cdrpm/error.hpp"
#include "cdrpm/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string level;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> min_arc_freq;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::string log_level;
  bool force = false;
};

cdrpm::PipelineConfig resolve(const Flags& f) {
  cdrpm::PipelineConfig c = f.config.empty() ? cdrpm::PipelineConfig{} : cdrpm::load_config(f.config);
  if (!f.out.empty()) c.out = f.out;
  if (!f.level.empty()) {
    try {
      c.level = cdrpm::parse_region_level(f.level);
    } catch (const cdrpm::Error& e) {
      throw cdrpm::Error(cdrpm::Errc::invalid_config, std::string("--level: ") + e.what());
    }
  }
  if (f.top_k) c.top_k = *f.top_k;
  if (f.min_arc_freq) c.min_arc_frequency = *f.min_arc_freq;
  if (f.threads) c.threads = *f.threads;
  if (f.seed) c.synth.seed = *f.seed;
  if (!f.log_level.empty()) c.log_level = cdrpm::parse_log_level(f.log_level);
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Call detail records to process-mining artifacts."};
  app.footer("Configuration file (INI) with every default:\n\n" + cdrpm::default_config_ini());
  app.require_subcommand(1);

  Flags flags;
  app.add_option("--config", flags.config, "INI configuration file");
  app.add_option("--out", flags.out, "run directory (default: run)");
  app.add_option("--level", flags.level, "region level for logs and OD: parish|municipality (default: municipality)");
  app.add_option("--top-k", flags.top_k, "variants to export, 0 for all (default: 20)");
  app.add_option("--min-arc-freq", flags.min_arc_freq, "hide DOT arcs below this frequency (default: 1)");
  app.add_option("--threads", flags.threads, "worker threads, 0 for the OpenMP default (default: 0)");
  app.add_option("--seed", flags.seed, "synthetic scenario seed (default: 1)");
  app.add_option("--log-level", flags.log_level, "error|warn|info|debug (default: info)");
  app.add_flag("--force", flags.force, "overwrite existing artifacts");

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"synth", "generate a synthetic scenario with ground truth"},
      {"position", "sample pseudo-locations inside tower sectors"},
      {"stays", "detect staypoints"},
      {"trips", "build triplegs and trips with mode labels"},
      {"log", "build the case log and the object-centric log"},
      {"discover", "discover DFG, OC-DFG and variants"},
      {"conform", "token-based replay of the case log on its DFG net"},
      {"validate", "OD matrix, survey comparison and recovery scores"},
      {"all", "run every stage in order"},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const cdrpm::PipelineConfig config = resolve(flags);
    cdrpm::set_log_level(config.log_level);
    const cdrpm::RunOptions options{flags.force};
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "all") {
      cdrpm::run_all(config, options);
      return 0;
    }
    for (cdrpm::Stage s : cdrpm::kAllStages) {
      if (cdrpm::to_string(s) == name) {
        cdrpm::run_stage(s, config, options);
        return 0;
      }
    }
    return 1;
  } catch (const cdrpm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == cdrpm::Errc::io_error ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
