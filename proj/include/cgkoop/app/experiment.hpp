#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cgkoop/app/config.hpp"
#include "cgkoop/baselines/baselines.hpp"
#include "cgkoop/filter/cgfilter.hpp"
#include "cgkoop/pdelab/dataset.hpp"

namespace cgkoop::app {

namespace fs = std::filesystem;
using num::Tensor;
using model::Mlp;

/// Where a command writes and how many workers it may use.
struct RunContext {
  fs::path out;
  std::size_t threads = 1;
  std::ostream* log = nullptr;  // progress lines; null silences them
};

/// Writes `config.json` (the resolved config) into ctx.out.
void write_resolved_config(const fs::path& dir, const ExperimentConfig& cfg);

struct GeneratedData {
  pde::TrajectoryDataset train;
  pde::TrajectoryDataset test;
};

/// Solves the PDE for every trajectory and packs the train/test splits.
GeneratedData generate(const ExperimentConfig& cfg, std::size_t threads);

/// out/train and out/test dataset directories.
GeneratedData cmd_gen(const ExperimentConfig& cfg, const RunContext& ctx);

struct TrainOutcome {
  model::Checkpoint checkpoint;
  std::vector<train::EpochLog> stage1;
  std::vector<train::EpochLog> stage2;
};

/// Reads <data>/train. Writes out/checkpoint (final, with UQ net),
/// out/checkpoints/stage1, out/checkpoints/latest and the two log CSVs.
/// With `resume` (a stage-1 checkpoint) stage 1 is skipped.
TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& data, const RunContext& ctx,
                       const std::optional<fs::path>& resume = std::nullopt);

enum class Method { Cgkn, Enkf, Interp };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct EvalOutcome {
  base::MetricReport report;
  Tensor posterior_mean;  // [S × T × d]
  Tensor posterior_std;   // [S × T × d]
};

/// Runs one method on <data>/test and writes posterior_mean.cgt,
/// posterior_std.cgt, truth.cgt, metrics.csv, metrics.json, manifest.json;
/// cgkn also writes forecast.cgt (one-step) and rollout.cgt.
EvalOutcome cmd_eval(const ExperimentConfig& cfg, Method method, const fs::path& data, const RunContext& ctx,
                     const std::optional<fs::path>& checkpoint = std::nullopt);

/// Filter timing ladder; writes bench_filter.csv and bench_filter.json.
filter::ComplexityReport cmd_bench_filter(const std::vector<std::size_t>& ladder, std::size_t n_steps,
                                          const RunContext& ctx);

/// Collects metrics.csv from each run directory (experiment label from its
/// config.json), writes report.md and report.csv, and returns the table.
std::string cmd_report(const std::vector<fs::path>& runs, const RunContext& ctx);

}  // namespace cgkoop::app
