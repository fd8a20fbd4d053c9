// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// juntaq: exponent reports, oracle games and training experiments for
// finite junta problems. Exit codes: 0 success, 1 runtime failure,
// 2 configuration error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "juntaq/cli.hpp"
#include "juntaq/dynamics.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Query complexity and training dynamics for junta problems"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  const std::pair<const char*, const char*> commands[] = {
      {"exponents", "leap and cover exponents per query model"},
      {"detect", "detectable sets with witnesses"},
      {"game", "planted-support recovery against a query oracle"},
      {"sgd", "online SGD on a two-layer network"},
      {"df", "dimension-free mean-field recursion"},
      {"layerwise", "two-phase layer-wise training"},
      {"hard-instance", "instance visible to SQ but not to a given loss"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment JSON")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--threads", threads, "worker threads")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  Eigen::setNbThreads(threads);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = juntaq::load_config(command, config, seed);
    cfg.out = out;
    const auto summary = juntaq::run_command(cfg);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const juntaq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const juntaq::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
