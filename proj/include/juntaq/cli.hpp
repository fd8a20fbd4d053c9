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

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "juntaq/junta.hpp"

namespace juntaq {

/// Malformed or unknown configuration; the command-line tool exits with 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parsed experiment file. `problem` may be given inline or as a path
/// relative to the config file; `block` is the command's own section.
struct ExperimentConfig {
  std::string command;
  std::optional<JuntaProblem> problem;
  nlohmann::json block;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // empty: no files are written
};

// Throws ConfigError naming `where` when `j` has a key outside `allowed`.
void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed,
                const std::string& where);

/// Validates the top-level schema {problem?, seed?, <command>: {...}}.
/// `seed_override` (the --seed flag) wins over the file.
ExperimentConfig parse_config(const std::string& command,
                              const nlohmann::json& j,
                              const std::filesystem::path& base_dir,
                              std::optional<std::uint64_t> seed_override);

ExperimentConfig load_config(const std::string& command,
                             const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override);

// Each command returns its summary JSON and, when cfg.out is set, writes
// summary.json plus its command-specific files there.
nlohmann::json cmd_exponents(const ExperimentConfig& cfg);
nlohmann::json cmd_detect(const ExperimentConfig& cfg);
nlohmann::json cmd_game(const ExperimentConfig& cfg);
nlohmann::json cmd_sgd(const ExperimentConfig& cfg);
nlohmann::json cmd_df(const ExperimentConfig& cfg);
nlohmann::json cmd_layerwise(const ExperimentConfig& cfg);
nlohmann::json cmd_hard_instance(const ExperimentConfig& cfg);

nlohmann::json run_command(const ExperimentConfig& cfg);

}  // namespace juntaq
