#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikemusic/montecarlo.hpp"

namespace spikemusic {

/// One sweep point inside a config file: the geometry dimensions plus the
/// per-source power, given either as a shared SNR in decibels
/// (omega_k^2 = 10^(snr_db/10) for every source) or as explicit powers,
/// one per angle, sorted non-increasing. Exactly one of the two forms is
/// accepted per scenario.
struct ScenarioSpec {
  int num_sensors = 0;
  int num_snapshots = 0;
  std::optional<double> snr_db;
  std::optional<std::vector<double>> powers;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// An experiment description as stored on disk. Source angles, steering
/// scale, trial budget and estimator knobs are shared across the file's
/// scenarios; each scenario varies the dimensions and the source power.
/// Optional fields keep their on-disk absence so that parse -> serialize is
/// the identity on accepted files.
struct RunConfig {
  std::optional<std::string> description;
  std::uint64_t master_seed = 0;
  double steering_scale = 1.0;
  std::vector<double> angles;
  int trials = 0;
  std::optional<double> detect_margin;  // absent: kDefaultDetectMargin
  std::optional<int> grid_size;         // absent or 0: max(1024, 8N)
  std::optional<double> noise_scale;    // absent: 1
  std::vector<ScenarioSpec> scenarios;

  double effective_detect_margin() const noexcept {
    return detect_margin.value_or(kDefaultDetectMargin);
  }
  int effective_grid_size() const noexcept { return grid_size.value_or(0); }
  double effective_noise_scale() const noexcept {
    return noise_scale.value_or(1.0);
  }

  /// Semantic checks on top of the structural parse; throws
  /// std::invalid_argument naming the offending field ("RunConfig.trials:
  /// must be positive", "RunConfig.scenarios[2]: ...").
  void validate() const;

  /// Validates and expands each ScenarioSpec into a runnable Scenario with
  /// the shared angles, powers resolved from snr_db when needed, and the
  /// effective estimator knobs filled in.
  std::vector<Scenario> to_scenarios() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Per-source power implied by a scenario: either 10^(snr_db/10) replicated
/// across the sources or the explicit powers array.
std::vector<double> resolve_powers(const ScenarioSpec& item, int num_sources);

/// Structural parse of a JSON document. Unknown keys, missing required keys
/// and type mismatches throw std::invalid_argument naming the field; value
/// ranges are left to validate().
RunConfig parse_run_config(const nlohmann::json& document);

/// Serialization with a fixed key order; optional fields are emitted only
/// when present, so to_json(parse_run_config(x)) == x for accepted files.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Reads, parses and validates a config file. Throws std::runtime_error
/// naming the path when the file cannot be read, std::invalid_argument on
/// malformed JSON or schema violations.
RunConfig load_run_config(const std::string& path);

/// Writes to_json(config) with two-space indentation and a trailing newline.
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace spikemusic
