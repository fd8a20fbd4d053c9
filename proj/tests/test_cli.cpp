#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "juntaq/cli.hpp"
#include "properties.hpp"

using namespace juntaq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {
const fs::path kConfigs = fs::path(JUNTAQ_SOURCE_DIR) / "configs";

json staircase() {
  return json::parse(R"({"hypercube": {"P": 2, "fourier": {"1": 1, "1,2": 1}}})");
}
}  // namespace

TEST_CASE("unknown keys are rejected") {
  json j = {{"problem", staircase()}, {"game", {{"d", 8}, {"tua", 0.1}}}};
  CHECK_THROWS_AS(cmd_game(parse_config("game", j, ".", std::nullopt)),
                  ConfigError);
  j = {{"problem", staircase()}, {"colour", 1}};
  CHECK_THROWS_AS(parse_config("exponents", j, ".", std::nullopt), ConfigError);
}

TEST_CASE("malformed values become config errors") {
  json j = {{"problem", staircase()}, {"game", {{"d", "eight"}}}};
  CHECK_THROWS_AS(cmd_game(parse_config("game", j, ".", std::nullopt)),
                  ConfigError);
  j = {{"problem", staircase()}, {"sgd", {{"loss", "cross-entropy"}}}};
  CHECK_THROWS_AS(cmd_sgd(parse_config("sgd", j, ".", std::nullopt)),
                  ConfigError);
  CHECK_THROWS_AS(load_config("exponents", kConfigs / "missing.json",
                              std::nullopt),
                  ConfigError);
}

TEST_CASE("the seed flag wins over the file") {
  json j = {{"problem", staircase()}, {"seed", 5}};
  CHECK(parse_config("exponents", j, ".", std::nullopt).seed == 5);
  CHECK(parse_config("exponents", j, ".", 9).seed == 9);
}

TEST_CASE("shipped configs parse for every block they carry") {
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    std::ifstream in(entry.path());
    const json j = json::parse(in);
    for (const auto& [key, value] : j.items()) {
      if (key == "problem" || key == "seed" || key == "description") continue;
      const std::string command = key == "hard_instance" ? "hard-instance" : key;
      INFO(entry.path().filename().string(), " ", command);
      CHECK_NOTHROW(load_config(command, entry.path(), std::nullopt));
    }
  }
}

TEST_CASE("commands are deterministic under a fixed seed") {
  const auto scratch = fs::temp_directory_path() / "juntaq_unit_cli";
  const auto r = juntaq::testing::cli_determinism(kConfigs, scratch);
  fs::remove_all(scratch);
  INFO(r.first_failure);
  CHECK(r.ok());
}

TEST_CASE("sgd writes a trace with one row per record") {
  auto cfg = load_config("sgd", kConfigs / "fig1a.json", std::nullopt);
  cfg.block.update(json{{"steps", 30}, {"m", 16}, {"record_every", 10},
                        {"test_samples", 100}});
  cfg.out = fs::temp_directory_path() / "juntaq_unit_sgd";
  fs::remove_all(cfg.out);
  const json s = run_command(cfg);
  CHECK(s.at("command") == "sgd");
  std::ifstream csv(cfg.out / "curves.csv");
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  CHECK(line.rfind("step,t,train_loss,test_mse", 0) == 0);
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  fs::remove_all(cfg.out);
}
