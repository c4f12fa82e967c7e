#include "spikemusic/run_config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spikemusic {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& message) {
  throw std::invalid_argument("RunConfig." + field + ": " + message);
}

void check_keys(const json& object, const std::string& prefix,
                const std::vector<std::string>& known,
                const std::vector<std::string>& required) {
  for (const auto& item : object.items()) {
    bool found = false;
    for (const auto& key : known) found = found || key == item.key();
    if (!found) fail(prefix + item.key(), "unknown key");
  }
  for (const auto& key : required) {
    if (!object.contains(key)) fail(prefix + key, "missing required key");
  }
}

std::uint64_t get_u64(const json& value, const std::string& field) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(value.get<std::int64_t>());
  }
  fail(field, "must be a non-negative integer");
}

int get_int(const json& value, const std::string& field) {
  const std::uint64_t wide = get_u64(value, field);
  if (wide > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    fail(field, "exceeds the supported range");
  }
  return static_cast<int>(wide);
}

double get_double(const json& value, const std::string& field) {
  if (!value.is_number()) fail(field, "must be a number");
  return value.get<double>();
}

std::string get_string(const json& value, const std::string& field) {
  if (!value.is_string()) fail(field, "must be a string");
  return value.get<std::string>();
}

std::vector<double> get_double_array(const json& value,
                                     const std::string& field) {
  if (!value.is_array()) fail(field, "must be an array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(get_double(value[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ScenarioSpec parse_scenario(const json& object, std::size_t index) {
  const std::string prefix = "scenarios[" + std::to_string(index) + "]";
  if (!object.is_object()) fail(prefix, "must be an object");
  check_keys(object, prefix + ".",
             {"num_sensors", "num_snapshots", "snr_db", "powers"},
             {"num_sensors", "num_snapshots"});
  if (object.contains("snr_db") == object.contains("powers")) {
    fail(prefix, "exactly one of snr_db or powers is required");
  }
  ScenarioSpec item;
  item.num_sensors = get_int(object["num_sensors"], prefix + ".num_sensors");
  item.num_snapshots =
      get_int(object["num_snapshots"], prefix + ".num_snapshots");
  if (object.contains("snr_db")) {
    item.snr_db = get_double(object["snr_db"], prefix + ".snr_db");
  } else {
    item.powers = get_double_array(object["powers"], prefix + ".powers");
  }
  return item;
}

}  // namespace

std::vector<double> resolve_powers(const ScenarioSpec& item,
                                   int num_sources) {
  if (item.powers.has_value()) return *item.powers;
  const double power = std::pow(10.0, item.snr_db.value_or(0.0) / 10.0);
  return std::vector<double>(static_cast<std::size_t>(num_sources), power);
}

void RunConfig::validate() const {
  if (trials < 1) fail("trials", "must be positive");
  if (angles.empty()) fail("angles", "must contain at least one angle");
  if (scenarios.empty()) fail("scenarios", "must contain at least one entry");
  if (detect_margin.has_value() &&
      !(std::isfinite(*detect_margin) && *detect_margin >= 0.0)) {
    fail("detect_margin", "must be finite and non-negative");
  }
  if (noise_scale.has_value() &&
      !(std::isfinite(*noise_scale) && *noise_scale >= 0.0)) {
    fail("noise_scale", "must be finite and non-negative");
  }
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const ScenarioSpec& item = scenarios[i];
    const std::string prefix = "scenarios[" + std::to_string(i) + "]";
    if (item.snr_db.has_value() && !std::isfinite(*item.snr_db)) {
      fail(prefix + ".snr_db", "must be finite");
    }
    if (item.powers.has_value() &&
        item.powers->size() != angles.size()) {
      fail(prefix + ".powers", "needs one entry per angle (" +
                                   std::to_string(angles.size()) + ")");
    }
    ArrayConfig config;
    config.num_sensors = item.num_sensors;
    config.num_snapshots = item.num_snapshots;
    config.steering_scale = steering_scale;
    config.angles = angles;
    config.powers = resolve_powers(item, static_cast<int>(angles.size()));
    config.noise_scale = effective_noise_scale();
    try {
      config.validate();
    } catch (const std::invalid_argument& error) {
      fail(prefix, error.what());
    }
    const int grid = effective_grid_size();
    if (grid != 0 && grid < PhiGrid::minimum_size(item.num_sensors)) {
      fail("grid_size",
           std::to_string(grid) + " is below the minimum " +
               std::to_string(PhiGrid::minimum_size(item.num_sensors)) +
               " for " + prefix + " (num_sensors " +
               std::to_string(item.num_sensors) + ")");
    }
  }
}

std::vector<Scenario> RunConfig::to_scenarios() const {
  validate();
  std::vector<Scenario> out;
  out.reserve(scenarios.size());
  for (const ScenarioSpec& item : scenarios) {
    Scenario scenario;
    scenario.config.num_sensors = item.num_sensors;
    scenario.config.num_snapshots = item.num_snapshots;
    scenario.config.steering_scale = steering_scale;
    scenario.config.angles = angles;
    scenario.config.powers =
        resolve_powers(item, static_cast<int>(angles.size()));
    scenario.config.noise_scale = effective_noise_scale();
    scenario.trials = trials;
    scenario.detect_margin = effective_detect_margin();
    scenario.grid_size = effective_grid_size();
    out.push_back(std::move(scenario));
  }
  return out;
}

RunConfig parse_run_config(const json& document) {
  if (!document.is_object()) fail("", "top level must be a JSON object");
  check_keys(document, "",
             {"description", "master_seed", "steering_scale", "angles",
              "trials", "detect_margin", "grid_size", "noise_scale",
              "scenarios"},
             {"master_seed", "steering_scale", "angles", "trials",
              "scenarios"});
  RunConfig config;
  if (document.contains("description")) {
    config.description = get_string(document["description"], "description");
  }
  config.master_seed = get_u64(document["master_seed"], "master_seed");
  config.steering_scale =
      get_double(document["steering_scale"], "steering_scale");
  config.angles = get_double_array(document["angles"], "angles");
  config.trials = get_int(document["trials"], "trials");
  if (document.contains("detect_margin")) {
    config.detect_margin =
        get_double(document["detect_margin"], "detect_margin");
  }
  if (document.contains("grid_size")) {
    config.grid_size = get_int(document["grid_size"], "grid_size");
  }
  if (document.contains("noise_scale")) {
    config.noise_scale = get_double(document["noise_scale"], "noise_scale");
  }
  const json& list = document["scenarios"];
  if (!list.is_array()) fail("scenarios", "must be an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    config.scenarios.push_back(parse_scenario(list[i], i));
  }
  return config;
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json doc;
  if (config.description.has_value()) doc["description"] = *config.description;
  doc["master_seed"] = config.master_seed;
  doc["steering_scale"] = config.steering_scale;
  doc["angles"] = config.angles;
  doc["trials"] = config.trials;
  if (config.detect_margin.has_value()) {
    doc["detect_margin"] = *config.detect_margin;
  }
  if (config.grid_size.has_value()) doc["grid_size"] = *config.grid_size;
  if (config.noise_scale.has_value()) doc["noise_scale"] = *config.noise_scale;
  doc["scenarios"] = nlohmann::ordered_json::array();
  for (const ScenarioSpec& item : config.scenarios) {
    nlohmann::ordered_json entry;
    entry["num_sensors"] = item.num_sensors;
    entry["num_snapshots"] = item.num_snapshots;
    if (item.snr_db.has_value()) entry["snr_db"] = *item.snr_db;
    if (item.powers.has_value()) entry["powers"] = *item.powers;
    doc["scenarios"].push_back(std::move(entry));
  }
  return doc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json document;
  try {
    document = json::parse(buffer.str());
  } catch (const json::parse_error& error) {
    throw std::invalid_argument("RunConfig: " + path +
                                " is not valid JSON: " + error.what());
  }
  RunConfig config = parse_run_config(document);
  config.validate();
  return config;
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace spikemusic
