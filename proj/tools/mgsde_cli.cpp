// Command-line front end. Talks to the library only through mgsde.h.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mgsde.h"

namespace {

const char* const kCommands[] = {"simulate-discrete", "simulate-sde",  "verify-lln", "verify-dissipativity",
                                 "drift-oracle",      "waiting-time", "scaling"};

const char* describe(const std::string& name) {
  if (name == "simulate-discrete") return "Run the discrete-time game and write y trajectories";
  if (name == "simulate-sde") return "Integrate the continuum SDE and write trajectories";
  if (name == "verify-lln") return "Law-of-large-numbers checks on the overlap statistics";
  if (name == "verify-dissipativity") return "Radial drift condition scan over probe directions";
  if (name == "drift-oracle") return "Compare discrete-game increments with the SDE drift";
  if (name == "waiting-time") return "Detect the waiting time to stationarity and fit the envelope";
  return "Waiting time against N (and optionally alpha)";
}

struct Flags {
  std::string config;
  std::string out;
  std::size_t jobs = 0;
  std::size_t seed_count = 0;
  std::vector<std::uint64_t> seeds;
};

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

int run(const std::string& command, const Flags& flags) {
  std::string text;
  if (!read_file(flags.config, text)) {
    std::cerr << "mgsde: configuration error: cannot read config file '" << flags.config << "'\n";
    return 2;
  }
  mgsde_run_options opts{};
  opts.out_dir = flags.out.empty() ? nullptr : flags.out.c_str();
  opts.jobs = flags.jobs;
  opts.seeds = flags.seeds.empty() ? nullptr : flags.seeds.data();
  opts.n_seeds = flags.seeds.size();
  opts.seed_count = flags.seed_count;

  int exit_code = 1;
  char* message = nullptr;
  const mgsde_status st = mgsde_run(command.c_str(), text.c_str(), &opts, &exit_code, &message, nullptr);
  if (st != MGSDE_OK) {
    std::cerr << "mgsde: " << mgsde_last_error() << "\n";
    return st == MGSDE_E_CONFIG || st == MGSDE_E_INVALID_ARGUMENT ? 2 : 1;
  }
  const std::string msg = message ? message : "";
  mgsde_string_free(message);
  (exit_code == 0 ? std::cout : std::cerr) << msg << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuum-time Minority Game simulation and verification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mgsde_version()));

  Flags flags;
  std::string chosen;
  for (const char* name : kCommands) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* count = sub->add_option("--seed-count", flags.seed_count, "Use seeds 1..M")->check(CLI::PositiveNumber);
    auto* list = sub->add_option("--seeds", flags.seeds, "Comma separated seed list")->delimiter(',');
    count->excludes(list);
    sub->callback([&chosen, name] { chosen = name; });
  }
  app.add_subcommand("version", "Print the library version")->callback([] { std::cout << mgsde_version() << "\n"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (chosen.empty()) return 0;
  return run(chosen, flags);
}
