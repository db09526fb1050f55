// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: every subcommand reads one JSON config and writes
// its artifacts into an output directory. Exit codes: 0 success, 2 config or
// schema error, 3 numerical precondition violation, 4 file I/O error.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spdcsim/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spdcsim: paired-photon spatial correlation engine"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
    bool strict = false;
  };

  const auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    auto args = std::make_shared<Args>();
    sub->add_option("--config", args->config, "JSON config file")->required();
    sub->add_option("--out", args->out, "override the config's output directory");
    sub->add_option("--seed", args->seed, "override the measurement seed")
        ->trigger_on_parse()
        ->each([args](const std::string&) { args->has_seed = true; });
    sub->add_flag("--strict", args->strict,
                  "fail when the state flunks the observability check");
    sub->parse_complete_callback([name, args] {
      spdcsim::CliOverrides ov;
      if (!args->out.empty()) ov.out = args->out;
      if (args->has_seed) ov.seed = args->seed;
      ov.strict = args->strict;
      const int rc = spdcsim::run_command(name, args->config, ov, std::cerr);
      if (rc != 0) throw CLI::RuntimeError(rc);
    });
  };

  add("simulate", "full pipeline: pump, state, observables, optional measurement");
  add("project", "observables of a saved state");
  add("rowmap", "row-correlation map of a saved state");
  add("sample", "camera frames and correlation estimates of a saved state");
  add("tailor", "retrieve a phase mask realizing a target far-field intensity");
  add("preview", "render a saved real map as a PGM image");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return 0;
}
