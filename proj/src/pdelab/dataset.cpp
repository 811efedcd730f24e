#include "cgkoop/pdelab/dataset.hpp"

#include <fstream>

#include "json.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/cgt_io.hpp"

namespace cgkoop::pde {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> uniform_observed(std::size_t d, std::size_t count) {
  if (count == 0 || count >= d || d % count != 0) {
    throw ConfigError("observed count d1 = " + std::to_string(count) + " must be < d and divide d = " +
                      std::to_string(d));
  }
  std::vector<std::size_t> idx(count);
  for (std::size_t k = 0; k < count; ++k) idx[k] = k * (d / count);
  return idx;
}

std::vector<std::size_t> observed_preset(const std::string& name, std::size_t d) {
  if (name == "burgers") return uniform_observed(d, 4);
  if (name == "ks") return uniform_observed(d, 8);
  throw ConfigError("dataset.obs_preset: unknown preset '" + name + "'");
}

Tensor TrajectoryDataset::trajectory(std::size_t k) const {
  const std::size_t t = length(), d = dim();
  if (k >= trajectories()) throw ContractError("trajectory index out of range");
  const auto begin = states.data().begin() + static_cast<std::ptrdiff_t>(k * t * d);
  return Tensor::matrix(t, d, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(t * d)));
}

void TrajectoryDataset::validate() const {
  if (states.rank() != 3) throw ShapeError("dataset states must be [S x T x d], got " + states.shape_string());
  if (length() < 2) throw ConfigError("dataset needs at least two time steps");
  if (dim() != grid.n) throw ShapeError("dataset width does not match its grid");
  if (observed.empty()) throw ConfigError("dataset has no observed indices");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] >= dim() || (i > 0 && observed[i] <= observed[i - 1])) {
      throw ConfigError("dataset observed indices must be strictly increasing and < d");
    }
  }
  if (noise_std < 0) throw ConfigError("dataset noise std must be >= 0");
}

TrajectoryDataset make_dataset(const Tensor& fine, const GridSpec& fine_grid, double fine_dt, const Subsample& sub,
                               std::vector<std::size_t> observed, double noise_std, num::RngStream& rng) {
  const bool single = fine.rank() == 2;
  if (!single && fine.rank() != 3) throw ShapeError("make_dataset: expected [S x T x n] or [T x n]");
  const std::size_t s = single ? 1 : fine.dims()[0];
  const std::size_t t = single ? fine.dims()[0] : fine.dims()[1];
  const std::size_t n = single ? fine.dims()[1] : fine.dims()[2];
  if (n != fine_grid.n) throw ShapeError("make_dataset: field width does not match the grid");
  if (sub.every_t == 0 || sub.every_x == 0) throw ConfigError("subsample strides must be >= 1");
  if (n % sub.every_x != 0) throw ConfigError("subsample.every_x must divide grid.n");
  if ((t - 1) % sub.every_t != 0) throw ConfigError("subsample.every_t must divide the number of solver intervals");
  if (noise_std < 0) throw ConfigError("noise std must be >= 0");

  TrajectoryDataset ds;
  ds.grid = GridSpec{fine_grid.length, n / sub.every_x};
  ds.dt = fine_dt * static_cast<double>(sub.every_t);
  ds.observed = std::move(observed);
  ds.noise_std = noise_std;
  const std::size_t tt = (t - 1) / sub.every_t + 1, d = ds.grid.n;
  ds.states = Tensor({s, tt, d});
  auto out = ds.states.data();
  const auto in = fine.data();
  for (std::size_t k = 0; k < s; ++k) {
    for (std::size_t r = 0; r < tt; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        double x = in[(k * t + r * sub.every_t) * n + j * sub.every_x];
        if (noise_std > 0) x += noise_std * rng.normal();
        out[(k * tt + r) * d + j] = x;
      }
    }
  }
  ds.provenance = "{}";
  ds.validate();
  return ds;
}

void write_dataset(const fs::path& dir, const TrajectoryDataset& ds) {
  ds.validate();
  fs::create_directories(dir);
  num::write_cgt(dir / "states.cgt", ds.states);
  std::vector<std::size_t> one_based;
  for (std::size_t i : ds.observed) one_based.push_back(i + 1);
  json m;
  m["schema_version"] = TrajectoryDataset::kSchemaVersion;
  m["states"] = "states.cgt";
  m["dims"] = {{"trajectories", ds.trajectories()}, {"steps", ds.length()}, {"d", ds.dim()}};
  m["grid"] = {{"length", ds.grid.length}, {"n", ds.grid.n}, {"dx", ds.grid.dx()}};
  m["dt"] = ds.dt;
  m["observed"] = ds.observed;
  m["observed_1based"] = one_based;
  m["noise_std"] = ds.noise_std;
  m["provenance"] = json::parse(ds.provenance.empty() ? "{}" : ds.provenance);
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

TrajectoryDataset read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("dataset: no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("dataset manifest: " + std::string(e.what()));
  }
  if (m.value("schema_version", 0) != TrajectoryDataset::kSchemaVersion) {
    throw ConfigError("dataset manifest: unsupported schema_version");
  }
  TrajectoryDataset ds;
  ds.states = num::read_cgt(dir / m.at("states").get<std::string>());
  ds.grid = GridSpec{m.at("grid").at("length").get<double>(), m.at("grid").at("n").get<std::size_t>()};
  ds.dt = m.at("dt").get<double>();
  ds.observed = m.at("observed").get<std::vector<std::size_t>>();
  ds.noise_std = m.at("noise_std").get<double>();
  ds.provenance = m.at("provenance").dump();
  ds.validate();
  return ds;
}

}  // namespace cgkoop::pde
