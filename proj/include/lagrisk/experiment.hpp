#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lagrisk/measures1d.hpp"
#include "lagrisk/oracles.hpp"
#include "lagrisk/solver.hpp"

namespace lagrisk {

struct ExperimentConfig {
  std::string preset = "custom";
  std::string variant;
  ProblemSpec problem;
  Schedule schedule;
  /// Set when the schedule comes from the automatic rule (resolved per N).
  std::optional<RateModel> rule;
  int rule_k_min = -2;
  std::uint64_t seed = 0;
  std::string output = "out";
  SolverOptions solver;
  /// Present when the comonotone reference applies (flip mask, possibly all false).
  std::optional<std::vector<bool>> reference_flips;
  std::vector<std::size_t> rate_ns;
  std::vector<std::uint64_t> rate_seeds;
  /// Fully merged configuration, echoed into metrics.json.
  nlohmann::json resolved;
};

struct PresetInfo {
  std::string name;
  std::string description;
  std::vector<std::string> variants;
};

[[nodiscard]] const std::vector<PresetInfo>& presets();
[[nodiscard]] std::string list_presets(bool as_json);
/// Default configuration of a preset, as JSON.
[[nodiscard]] nlohmann::json preset_defaults(const std::string& name, const std::string& variant = "");

/// Parses and validates a configuration. Unknown keys, wrong types and invalid
/// values raise ConfigError naming `source` and the offending line.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

[[nodiscard]] Density1D density_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json density_to_json(const Density1D& rho);
[[nodiscard]] nlohmann::json quantizer_to_json(const QuantizerResult& q);

/// Schedule actually used for N particles (resolves the automatic rule).
[[nodiscard]] Schedule schedule_for(const ExperimentConfig& cfg, std::size_t n);

struct SolveReport {
  SolveResult result;
  nlohmann::json metrics;
};

/// Runs one solve and writes points.csv, trace.jsonl, metrics.json and
/// cells.json into cfg.output. Artifacts of completed stages are kept when the
/// solver fails.
SolveReport run_solve(const ExperimentConfig& cfg);

struct RateRow {
  std::size_t n = 0;
  double lambda_final = 0.0;
  double risk_value = 0.0;  ///< averaged over seeds
  double reference = 0.0;
  double abs_error = 0.0;
  double marginal_w2_max = 0.0;
};

struct RateStudy {
  std::vector<RateRow> rows;
  RateFit fit;
};

/// Solves for every N in cfg.rate_ns and seed in cfg.rate_seeds. With a
/// non-empty `output` writes rates.csv, rates_runs.csv and rate_fit.json.
RateStudy run_rates(const ExperimentConfig& cfg, bool write_files = true);

/// Comonotone cloud of the configured marginals with its costs and risk value.
/// Writes points.csv and metrics.json.
nlohmann::json run_comonotone(const ExperimentConfig& cfg);

/// Writes the particle cloud as RFC-4180 CSV with cost and N w_i columns.
void write_points_csv(const std::string& path, const ParticleCloud& cloud, const std::vector<double>& costs,
                      const std::vector<double>& weights);

}  // namespace lagrisk
