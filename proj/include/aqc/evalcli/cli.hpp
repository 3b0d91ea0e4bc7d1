#pragma once

// Command-line front end: ingest, train, predict, evaluate, baseline,
// simulate and plot.

#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "aqc/seq_model/model.hpp"
#include "aqc/train/trainer.hpp"

namespace aqc::eval {

/// Everything `train` reads from its configuration file.
struct ExperimentConfig {
    model::ModelConfig model;
    train::TrainConfig train;
    std::optional<double> max_distance_km;  // graph edge cutoff
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Sections "model", "train" and "graph"; every key is optional. Unknown
/// keys raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
/// Reads a JSON configuration file. IoError if unreadable, ConfigError if
/// malformed.
ExperimentConfig load_experiment_config(const std::string& path);

/// Overrides both seeds from AQC_SEED when set. ConfigError unless the
/// value is a nonnegative integer.
void apply_seed_override(ExperimentConfig& cfg, const char* env_value);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Runs one command. Usage errors print help to `err` and return 1; data,
/// numeric, I/O and format errors print a message and return 2.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aqc::eval
