#include "cgkoop/baselines/baselines.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::base {

using nlohmann::json;

namespace {

// Views [T × d] as [1 × T × d].
Tensor as_batch(const Tensor& t) {
  if (t.rank() == 3) return t;
  if (t.rank() == 2) return t.reshaped({1, t.rows(), t.cols()});
  throw ShapeError("expected [S x T x d] or [T x d], got " + t.shape_string());
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Tensor interpolate_field(const Tensor& u1, const std::vector<std::size_t>& observed, const pde::GridSpec& grid) {
  const std::size_t m = observed.size(), n = grid.n;
  if (m < 2) throw ConfigError("interpolation needs at least two observed points");
  if (u1.size() != m) throw ShapeError("interpolate_field: " + std::to_string(u1.size()) + " values for " +
                                       std::to_string(m) + " observed points");
  for (std::size_t i = 0; i < m; ++i) {
    if (observed[i] >= n || (i > 0 && observed[i] <= observed[i - 1])) {
      throw ConfigError("interpolation points must be strictly increasing grid indices");
    }
  }
  const double dx = grid.dx(), period = grid.length;
  std::vector<double> h(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = static_cast<double>(observed[i]) * dx;
    const double b = i + 1 < m ? static_cast<double>(observed[i + 1]) * dx : static_cast<double>(observed[0]) * dx + period;
    h[i] = b - a;
  }
  // Cyclic system for the knot second derivatives; symmetric and diagonally dominant.
  Tensor a = Tensor::matrix(m, m), rhs = Tensor::matrix(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t prev = (i + m - 1) % m, next = (i + 1) % m;
    a(i, i) += 2 * (h[prev] + h[i]);
    a(i, prev) += h[prev];
    a(i, next) += h[i];
    rhs(i, 0) = 6 * ((u1[next] - u1[i]) / h[i] - (u1[i] - u1[prev]) / h[prev]);
  }
  const Tensor mm = num::solve_spd(a, rhs);

  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) {
    // Interval i holds x_j in [x_i, x_i + h_i) modulo the period.
    std::size_t i = m - 1;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      if (j >= observed[k] && j < observed[k + 1]) i = k;
    }
    const std::size_t next = (i + 1) % m;
    double t = (static_cast<double>(j) - static_cast<double>(observed[i])) * dx;
    if (t < 0) t += period;
    const double hi = h[i], s = hi - t;
    out[j] = mm(i, 0) * s * s * s / (6 * hi) + mm(next, 0) * t * t * t / (6 * hi) +
             (u1[i] / hi - mm(i, 0) * hi / 6) * s + (u1[next] / hi - mm(next, 0) * hi / 6) * t;
  }
  for (std::size_t i = 0; i < m; ++i) out[observed[i]] = u1[i];
  return out;
}

Tensor interpolate_series(const Tensor& u1_rows, const std::vector<std::size_t>& observed, const pde::GridSpec& grid) {
  const Tensor b = as_batch(u1_rows);
  const std::size_t s = b.dims()[0], t = b.dims()[1], m = b.dims()[2], n = grid.n;
  Tensor out({s, t, n});
  for (std::size_t r = 0; r < s * t; ++r) {
    const auto row = b.data().subspan(r * m, m);
    const Tensor f = interpolate_field(Tensor({m}, std::vector<double>(row.begin(), row.end())), observed, grid);
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + r * n);
  }
  return u1_rows.rank() == 2 ? out.reshaped({t, n}) : out;
}

double mse(const Tensor& truth, const Tensor& estimate) {
  if (!truth.same_shape(estimate)) {
    throw ShapeError("mse: " + truth.shape_string() + " vs " + estimate.shape_string());
  }
  if (truth.empty()) throw ShapeError("mse of empty tensors");
  double s = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - estimate[i]) * (truth[i] - estimate[i]);
  return s / static_cast<double>(truth.size());
}

MetricReport evaluate(const EvalInputs& in) {
  const Tensor truth = as_batch(in.truth), est = as_batch(in.posterior_mean);
  if (truth.dims()[0] != est.dims()[0] || truth.dims()[1] != est.dims()[1] || truth.dims()[2] != est.dims()[2]) {
    throw ShapeError("evaluate: truth " + truth.shape_string() + " vs posterior " + est.shape_string());
  }
  const std::size_t s = truth.dims()[0], t = truth.dims()[1], d = truth.dims()[2];
  if (in.warmup + 1 >= t) throw ContractError("evaluate: warm-up leaves no scored steps");
  std::vector<bool> is_obs(d, false);
  for (std::size_t i : in.observed) {
    if (i >= d) throw ShapeError("evaluate: observed index out of range");
    is_obs[i] = true;
  }
  const std::size_t d2 = d - in.observed.size();
  if (d2 == 0) throw ContractError("evaluate: no unobserved dimensions");

  MetricReport r;
  r.method = in.method;
  r.wall_time_s = in.wall_time_s;
  r.per_step_mse.assign(t, 0.0);
  double total = 0;
  for (std::size_t n = 0; n < t; ++n) {
    double step = 0;
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        if (is_obs[j]) continue;
        const std::size_t idx = (k * t + n) * d + j;
        step += (truth[idx] - est[idx]) * (truth[idx] - est[idx]);
      }
    }
    r.per_step_mse[n] = step / static_cast<double>(s * d2);
    if (n > in.warmup) total += step;
  }
  r.da_mse = total / static_cast<double>(s * (t - 1 - in.warmup) * d2);

  if (in.forecast) {
    const Tensor f = as_batch(*in.forecast);
    if (f.dims()[0] != s || f.dims()[1] + 1 != t || f.dims()[2] != d) {
      throw ShapeError("evaluate: forecast " + f.shape_string() + " does not match truth " + truth.shape_string());
    }
    double fs = 0;
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t n = 1; n < t; ++n) {
        for (std::size_t j = 0; j < d; ++j) {
          const double e = truth[(k * t + n) * d + j] - f[(k * (t - 1) + n - 1) * d + j];
          fs += e * e;
        }
      }
    }
    r.forecast_mse = fs / static_cast<double>(s * (t - 1) * d);
  }
  return r;
}

std::string MetricReport::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["method"] = method;
  j["forecast_mse"] = forecast_mse ? json(*forecast_mse) : json(nullptr);
  j["da_mse"] = da_mse;
  j["per_step_mse"] = per_step_mse;
  j["wall_time_s"] = wall_time_s;
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw ConfigError("metrics: unsupported schema_version");
    MetricReport r;
    r.method = j.at("method").get<std::string>();
    if (!j.at("forecast_mse").is_null()) r.forecast_mse = j.at("forecast_mse").get<double>();
    r.da_mse = j.at("da_mse").get<double>();
    r.per_step_mse = j.at("per_step_mse").get<std::vector<double>>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metrics json: ") + e.what());
  }
}

std::string MetricReport::csv_header() {
  return "schema_version,method,forecast_mse,da_mse,wall_time_s";
}

std::string MetricReport::csv_row() const {
  return std::to_string(kSchemaVersion) + "," + method + "," + (forecast_mse ? fmt(*forecast_mse) : "") + "," +
         fmt(da_mse) + "," + fmt(wall_time_s);
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricReport>& rows) {
  os << MetricReport::csv_header() << '\n';
  for (const auto& r : rows) os << r.csv_row() << '\n';
}

std::vector<MetricReport> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != MetricReport::csv_header()) throw ConfigError("metrics csv: bad header");
  std::vector<MetricReport> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw ConfigError("metrics csv: expected 5 columns in '" + line + "'");
    if (std::stoi(cells[0]) != MetricReport::kSchemaVersion) throw ConfigError("metrics csv: unsupported schema");
    MetricReport r;
    r.method = cells[1];
    if (!cells[2].empty()) r.forecast_mse = std::stod(cells[2]);
    r.da_mse = std::stod(cells[3]);
    r.wall_time_s = std::stod(cells[4]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_table(const std::vector<LabelledReport>& reports) {
  std::vector<std::string> experiments, methods;
  std::map<std::pair<std::string, std::string>, const MetricReport*> cell;
  for (const auto& lr : reports) {
    if (std::find(experiments.begin(), experiments.end(), lr.experiment) == experiments.end()) {
      experiments.push_back(lr.experiment);
    }
    if (std::find(methods.begin(), methods.end(), lr.report.method) == methods.end()) {
      methods.push_back(lr.report.method);
    }
    cell[{lr.report.method, lr.experiment}] = &lr.report;
  }
  auto sci = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4e", x);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "| Method |";
  for (const auto& e : experiments) os << ' ' << e << " forecast | " << e << " DA |";
  os << "\n|---|";
  for (std::size_t i = 0; i < experiments.size(); ++i) os << "---|---|";
  os << '\n';
  for (const auto& m : methods) {
    os << "| " << m << " |";
    for (const auto& e : experiments) {
      const auto it = cell.find({m, e});
      if (it == cell.end()) {
        os << " --- | --- |";
        continue;
      }
      const MetricReport& r = *it->second;
      os << ' ' << (r.forecast_mse ? sci(*r.forecast_mse) : "---") << " | " << sci(r.da_mse) << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cgkoop::base
