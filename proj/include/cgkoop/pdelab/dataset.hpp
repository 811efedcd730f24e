#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgkoop/numcore/rng.hpp"
#include "cgkoop/pdelab/spectral.hpp"

namespace cgkoop::pde {

struct Subsample {
  std::size_t every_t = 1;  // stride over stored solver rows
  std::size_t every_x = 1;  // stride over fine grid points
};

/// `count` uniformly spaced points on a d-point grid, 0-based: {0, d/count, ...}.
/// count = 4 on d = 64 gives the 1-based {1, 17, 33, 49}.
std::vector<std::size_t> uniform_observed(std::size_t d, std::size_t count);
/// Named presets: "burgers" (4 points) and "ks" (8 points).
std::vector<std::size_t> observed_preset(const std::string& name, std::size_t d);

struct TrajectoryDataset {
  static constexpr int kSchemaVersion = 1;

  Tensor states;  // [S × T × d] after sub-sampling and noise
  GridSpec grid;  // the sub-sampled grid
  double dt = 0;  // time between rows
  std::vector<std::size_t> observed;  // 0-based
  double noise_std = 0;
  std::string provenance;  // JSON object text: solver, seeds, config

  std::size_t trajectories() const { return states.dims()[0]; }
  std::size_t length() const { return states.dims()[1]; }
  std::size_t dim() const { return states.dims()[2]; }
  /// [T × d] copy of trajectory k.
  Tensor trajectory(std::size_t k) const;
  void validate() const;
};

/// Packs fine-grid trajectories ([S × T × n] or one [T × n]) into a dataset:
/// strided sub-sampling in time and space, then i.i.d. N(0, noise_std²) on every entry.
TrajectoryDataset make_dataset(const Tensor& fine, const GridSpec& fine_grid, double fine_dt, const Subsample& sub,
                               std::vector<std::size_t> observed, double noise_std, num::RngStream& rng);

/// Directory with states.cgt and manifest.json.
void write_dataset(const std::filesystem::path& dir, const TrajectoryDataset& ds);
TrajectoryDataset read_dataset(const std::filesystem::path& dir);

}  // namespace cgkoop::pde
