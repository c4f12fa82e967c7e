#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "spikemusic/run_config.hpp"

using namespace spikemusic;
using nlohmann::json;

namespace {

const char* kFullDocument = R"({
  "description": "two sources",
  "master_seed": 42,
  "steering_scale": 1.0,
  "angles": [0.5, 1.0],
  "trials": 16,
  "detect_margin": 0.3,
  "grid_size": 2048,
  "noise_scale": 1.0,
  "scenarios": [
    {"num_sensors": 20, "num_snapshots": 40, "snr_db": 10.0},
    {"num_sensors": 30, "num_snapshots": 60, "powers": [10.0, 4.0]}
  ]
})";

const char* kMinimalDocument = R"({
  "master_seed": 7,
  "steering_scale": 1.0,
  "angles": [0.5],
  "trials": 2,
  "scenarios": [{"num_sensors": 10, "num_snapshots": 20, "snr_db": 10.0}]
})";

RunConfig parse_text(const std::string& text) {
  return parse_run_config(json::parse(text));
}

/// Expects parse or validation of `text` to throw std::invalid_argument
/// whose message mentions `needle`.
void expect_rejected(const std::string& text, const std::string& needle) {
  try {
    RunConfig config = parse_text(text);
    config.validate();
    FAIL_CHECK("expected rejection mentioning " << needle << " for " << text);
  } catch (const std::invalid_argument& err) {
    INFO("message: " << err.what());
    CHECK(std::string(err.what()).find(needle) != std::string::npos);
  }
}

/// Rewrites one top-level key of the full document (null value erases it).
std::string full_with(const std::string& key, const json& value) {
  json doc = json::parse(kFullDocument);
  if (value.is_null()) {
    doc.erase(key);
  } else {
    doc[key] = value;
  }
  return doc.dump();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string source_config(const std::string& name) {
  return std::string(SPIKEMUSIC_SOURCE_DIR) + "/configs/" + name;
}

}  // namespace

TEST_CASE("full document parses into the expected fields") {
  const RunConfig config = parse_text(kFullDocument);
  CHECK_NOTHROW(config.validate());
  CHECK(config.description.value() == "two sources");
  CHECK(config.master_seed == 42);
  CHECK(config.steering_scale == 1.0);
  CHECK(config.angles == std::vector<double>{0.5, 1.0});
  CHECK(config.trials == 16);
  CHECK(config.detect_margin.value() == 0.3);
  CHECK(config.grid_size.value() == 2048);
  CHECK(config.noise_scale.value() == 1.0);
  REQUIRE(config.scenarios.size() == 2);
  CHECK(config.scenarios[0].num_sensors == 20);
  CHECK(config.scenarios[0].num_snapshots == 40);
  CHECK(config.scenarios[0].snr_db.value() == 10.0);
  CHECK_FALSE(config.scenarios[0].powers.has_value());
  CHECK_FALSE(config.scenarios[1].snr_db.has_value());
  CHECK(config.scenarios[1].powers.value() ==
        std::vector<double>{10.0, 4.0});
}

TEST_CASE("optional fields default when absent") {
  const RunConfig config = parse_text(kMinimalDocument);
  CHECK_NOTHROW(config.validate());
  CHECK_FALSE(config.description.has_value());
  CHECK(config.effective_detect_margin() == kDefaultDetectMargin);
  CHECK(config.effective_grid_size() == 0);
  CHECK(config.effective_noise_scale() == 1.0);
}

TEST_CASE("serialization round-trips accepted documents") {
  for (const char* text : {kFullDocument, kMinimalDocument}) {
    const json original = json::parse(text);
    const RunConfig config = parse_run_config(original);
    const json reserialized = json::parse(to_json(config).dump());
    CHECK(reserialized == original);
    CHECK(parse_run_config(reserialized) == config);
  }
}

TEST_CASE("unknown and missing keys are rejected by name") {
  expect_rejected(full_with("typo_key", 3), "typo_key");
  expect_rejected(full_with("master_seed", nullptr), "master_seed");
  expect_rejected(full_with("scenarios", nullptr), "scenarios");

  json doc = json::parse(kFullDocument);
  doc["scenarios"][1]["surprise"] = 1;
  expect_rejected(doc.dump(), "scenarios[1].surprise");
  doc = json::parse(kFullDocument);
  doc["scenarios"][0].erase("num_snapshots");
  expect_rejected(doc.dump(), "scenarios[0].num_snapshots");
}

TEST_CASE("each scenario takes exactly one power specification") {
  json doc = json::parse(kFullDocument);
  doc["scenarios"][0]["powers"] = {10.0, 10.0};  // now has snr_db and powers
  expect_rejected(doc.dump(), "exactly one of snr_db or powers");
  doc = json::parse(kFullDocument);
  doc["scenarios"][0].erase("snr_db");
  expect_rejected(doc.dump(), "exactly one of snr_db or powers");
}

TEST_CASE("type mismatches are rejected by name") {
  expect_rejected(full_with("trials", 2.5), "trials");
  expect_rejected(full_with("trials", -3), "trials");
  expect_rejected(full_with("master_seed", -1), "master_seed");
  expect_rejected(full_with("angles", "oops"), "angles");
  expect_rejected(full_with("angles", json::array({0.5, "oops"})),
                  "angles[1]");
  expect_rejected(full_with("description", 5), "description");
  expect_rejected(full_with("grid_size", 1.5), "grid_size");
  expect_rejected("[1, 2]", "object");
}

TEST_CASE("semantic validation names the offending field") {
  expect_rejected(full_with("trials", 0), "trials");
  expect_rejected(full_with("grid_size", 16), "grid_size");
  expect_rejected(full_with("detect_margin", -0.1), "detect_margin");
  expect_rejected(full_with("noise_scale", -1.0), "noise_scale");
  expect_rejected(full_with("angles", json::array()), "angles");
  expect_rejected(full_with("scenarios", json::array()), "scenarios");
  // Geometry violations surface with the scenario index prefixed.
  json doc = json::parse(kFullDocument);
  doc["scenarios"][1]["powers"] = {4.0, 10.0};  // increasing
  expect_rejected(doc.dump(), "scenarios[1]");
  doc = json::parse(kFullDocument);
  doc["scenarios"][1]["powers"] = {10.0};  // one entry for two angles
  expect_rejected(doc.dump(), "scenarios[1].powers");
  doc = json::parse(kFullDocument);
  doc["scenarios"][0]["num_snapshots"] = 19;  // fewer snapshots than sensors
  expect_rejected(doc.dump(), "scenarios[0]");
  expect_rejected(full_with("angles", json::array({0.5, 4.0})), "angles");
}

TEST_CASE("scenario expansion fills geometry and knobs") {
  const RunConfig config = parse_text(kFullDocument);
  const std::vector<Scenario> scenarios = config.to_scenarios();
  REQUIRE(scenarios.size() == 2);
  CHECK(scenarios[0].config.num_sensors == 20);
  CHECK(scenarios[0].config.num_snapshots == 40);
  CHECK(scenarios[0].config.steering_scale == 1.0);
  CHECK(scenarios[0].config.angles == std::vector<double>{0.5, 1.0});
  REQUIRE(scenarios[0].config.powers.size() == 2);
  // 10 dB over two sources resolves to omega^2 = 10 for each.
  CHECK(scenarios[0].config.powers[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(scenarios[0].config.powers[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(scenarios[1].config.powers == std::vector<double>{10.0, 4.0});
  CHECK(scenarios[0].trials == 16);
  CHECK(scenarios[0].detect_margin == 0.3);
  CHECK(scenarios[0].grid_size == 2048);

  const RunConfig minimal = parse_text(kMinimalDocument);
  const std::vector<Scenario> defaults = minimal.to_scenarios();
  REQUIRE(defaults.size() == 1);
  CHECK(defaults[0].detect_margin == kDefaultDetectMargin);
  CHECK(defaults[0].grid_size == 0);
  CHECK(defaults[0].config.noise_scale == 1.0);
}

TEST_CASE("snr_db and explicit powers agree") {
  RunConfig config = parse_text(kMinimalDocument);
  RunConfig explicit_powers = config;
  explicit_powers.scenarios[0].snr_db.reset();
  explicit_powers.scenarios[0].powers = std::vector<double>{10.0};
  const auto a = config.to_scenarios();
  const auto b = explicit_powers.to_scenarios();
  REQUIRE(a.size() == b.size());
  CHECK(a[0].config.powers[0] ==
        doctest::Approx(b[0].config.powers[0]).epsilon(1e-12));
}

TEST_CASE("file save and load round-trip") {
  const RunConfig config = parse_text(kFullDocument);
  const std::string path =
      (std::filesystem::temp_directory_path() / "spikemusic_cfg.json")
          .string();
  save_run_config(config, path);
  const RunConfig reloaded = load_run_config(path);
  CHECK(reloaded == config);
  // Saved bytes are exactly the canonical serialization.
  CHECK(read_file(path) == to_json(config).dump(2) + "\n");
  std::filesystem::remove(path);

  CHECK_THROWS_WITH_AS(load_run_config("/nonexistent/cfg.json"),
                       doctest::Contains("/nonexistent/cfg.json"),
                       std::runtime_error);

  const std::string broken =
      (std::filesystem::temp_directory_path() / "spikemusic_broken.json")
          .string();
  std::ofstream(broken) << "{ not json";
  CHECK_THROWS_AS(load_run_config(broken), std::invalid_argument);
  std::filesystem::remove(broken);
}

TEST_CASE("bundled sweep configs load and round-trip byte for byte") {
  const RunConfig fig2 = load_run_config(source_config("fig2.json"));
  REQUIRE(fig2.scenarios.size() == 7);
  CHECK(fig2.trials == 2000);
  CHECK(fig2.angles == std::vector<double>{0.5, 1.0});
  for (const ScenarioSpec& item : fig2.scenarios) {
    CHECK(item.num_snapshots == 2 * item.num_sensors);
    CHECK(item.snr_db.value() == 10.0);
  }
  CHECK(fig2.scenarios.front().num_sensors == 5);
  CHECK(fig2.scenarios.back().num_sensors == 50);

  const RunConfig fig3 = load_run_config(source_config("fig3.json"));
  REQUIRE(fig3.scenarios.size() == 6);
  CHECK(fig3.trials == 5000);
  std::vector<double> snrs;
  for (const ScenarioSpec& item : fig3.scenarios) {
    CHECK(item.num_sensors == 20);
    CHECK(item.num_snapshots == 40);
    snrs.push_back(item.snr_db.value());
  }
  CHECK(snrs == std::vector<double>{0.0, 6.0, 8.0, 10.0, 14.0, 20.0});

  for (const char* name : {"fig2.json", "fig3.json"}) {
    const std::string path = source_config(name);
    CHECK(read_file(path) ==
          to_json(load_run_config(path)).dump(2) + "\n");
  }
}
