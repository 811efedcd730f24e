#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cgkoop/numcore/tensor.hpp"
#include "cgkoop/pdelab/spectral.hpp"

namespace cgkoop::base {

using num::Tensor;

/// Periodic cubic spline through the observed points, evaluated on every grid
/// point. Observed entries are copied through unchanged.
Tensor interpolate_field(const Tensor& u1, const std::vector<std::size_t>& observed, const pde::GridSpec& grid);
/// Row-wise interpolate_field over [N × d1] (or [S × N × d1]) observations.
Tensor interpolate_series(const Tensor& u1_rows, const std::vector<std::size_t>& observed, const pde::GridSpec& grid);

/// (1/(MN)) ΣΣ (x* − x)² over all entries.
double mse(const Tensor& truth, const Tensor& estimate);

struct MetricReport {
  static constexpr int kSchemaVersion = 1;

  std::string method;
  std::optional<double> forecast_mse;
  double da_mse = 0;
  std::vector<double> per_step_mse;  // DA error per time row, warm-up included
  double wall_time_s = 0;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  static std::string csv_header();
  std::string csv_row() const;
};

/// Parses a metrics.csv written by write_metrics_csv (header plus rows).
std::vector<MetricReport> read_metrics_csv(std::istream& is);
void write_metrics_csv(std::ostream& os, const std::vector<MetricReport>& rows);

struct EvalInputs {
  std::string method;
  /// Truth and posterior means are [S × T × d] (or [T × d]). Row 0 of each
  /// trajectory is the state before any assimilation step and never scored.
  Tensor truth;
  Tensor posterior_mean;
  /// Optional one-step predictions of rows 1..T−1 from rows 0..T−2, [S × (T−1) × d].
  std::optional<Tensor> forecast;
  std::vector<std::size_t> observed;
  std::size_t warmup = 0;
  double wall_time_s = 0;
};

/// DA MSE over unobserved dims for rows n ∈ (N_b, T−1]; forecast MSE over the full state.
MetricReport evaluate(const EvalInputs& in);

/// Table with one row per method and a forecast/DA column pair per experiment.
struct LabelledReport {
  std::string experiment;
  MetricReport report;
};
std::string format_table(const std::vector<LabelledReport>& reports);

}  // namespace cgkoop::base
