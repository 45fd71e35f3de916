#pragma once

#include <filesystem>
#include <vector>

#include "koopkit/config.hpp"
#include "koopkit/dynamics.hpp"

namespace koopkit {

/// Runs the configured mode end to end and writes its CSV artifacts plus manifest.csv
/// into config.output_dir. Returns the written paths in order.
/// Numerical failures are rethrown as NumericalError prefixed with the stage name.
std::vector<std::filesystem::path> run(const ExperimentConfig& config);

/// Same as `run`, on a precomputed trajectory (sampled per config.system).
std::vector<std::filesystem::path> run(const ExperimentConfig& config, const TrajectoryDataset& dataset);

/// Simulates the configured system with the configured covariate and response maps.
TrajectoryDataset simulate_configured(const ExperimentConfig& config);

}  // namespace koopkit
