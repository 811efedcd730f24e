#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "cgkoop/model/cgkn.hpp"
#include "cgkoop/pdelab/grf.hpp"
#include "cgkoop/pdelab/spectral.hpp"
#include "cgkoop/training/trainer.hpp"

namespace cgkoop::app {

struct DatasetConfig {
  pde::Equation pde = pde::Equation::Burgers;
  pde::GridSpec grid{1.0, 128};  // solver grid
  double dt = 1e-3;              // solver step
  double t_final = 2.0;
  double nu = 0.01;
  double sample_dt = 0.1;        // time between dataset rows
  std::size_t sample_nx = 32;    // dataset grid points
  double noise_std = 0.0;
  std::string obs_preset = "burgers";
  std::vector<std::size_t> obs_indices;  // 1-based; overrides the preset when set
  std::string initial = "grf";           // "grf" or "preset" (KS literal initial condition)
  pde::GrfSpec grf;
  std::size_t train_trajectories = 100;  // GRF initial conditions only
  std::size_t test_trajectories = 10;
  double train_fraction = 0.8;           // preset initial condition: time split of the single run

  std::size_t record_every() const;
  std::size_t stride_x() const;
  /// 0-based indices on the dataset grid.
  std::vector<std::size_t> observed() const;
  void validate() const;
};

struct ModelConfig {
  std::size_t dv = 10;
  model::ModelShape shape;
};

struct EnkfSection {
  std::size_t members = 100;
  double inflation = 1.0;
  /// Half-width in dataset-grid units; infinity disables localization.
  double localization = std::numeric_limits<double>::infinity();
  /// Perturbation std; negative means "use dataset.noise_std".
  double obs_std = -1.0;
  std::size_t grid_n = 0;  // forward-model grid; 0 means the dataset grid
  double dt = 0.01;        // forward-model step

  double effective_obs_std(const DatasetConfig& ds) const { return obs_std >= 0 ? obs_std : ds.noise_std; }
};

struct EvalConfig {
  std::size_t warmup = 0;  // steps excluded from the DA MSE
  std::size_t max_steps = 0;  // truncate test trajectories to this many steps; 0 keeps all
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  train::TrainConfig train;
  train::UqConfig uq;
  EnkfSection enkf;
  EvalConfig eval;
  std::size_t checkpoint_every = 0;  // epochs; 0 only writes stage-end checkpoints

  /// Cross-field validation; throws ConfigError naming the offending field.
  void validate() const;
  /// Resolved config with every default filled in.
  std::string to_json() const;
};

/// Parses TOML (.toml) or JSON (anything else). Unknown keys are errors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig parse_config_toml(const std::string& text);

}  // namespace cgkoop::app
