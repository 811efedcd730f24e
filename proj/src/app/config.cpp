#include "cgkoop/app/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "toml.hpp"

#include "cgkoop/errors.hpp"
#include "cgkoop/pdelab/dataset.hpp"

namespace cgkoop::app {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json j = json::object();
    for (auto&& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    json j = json::array();
    for (auto&& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) {
    const double x = v->get();
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
  }
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ConfigError("config: unsupported TOML value type");
}

// Reads keys from one section and remembers which were consumed.
class Section {
 public:
  Section(const json& root, std::string name) : name_(std::move(name)) {
    if (name_.empty()) {
      obj_ = &root;
    } else if (root.contains(name_)) {
      obj_ = &root.at(name_);
      if (!obj_->is_object()) throw ConfigError("config: '" + name_ + "' must be a table");
    }
  }

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad value for '" + path(key) + "'");
    }
  }

  void read_double(const std::string& key, double& out) {
    used_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    if (v.is_string() && v.get<std::string>() == "inf") {
      out = std::numeric_limits<double>::infinity();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      throw ConfigError("config: bad value for '" + path(key) + "'");
    }
  }

  void read_optional(const std::string& key, std::optional<double>& out) {
    used_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& raw = obj_->at(key);
    if (raw.is_string() && raw.get<std::string>() == "default") {
      out.reset();
      return;
    }
    double v = 0;
    read_double(key, v);
    out = v;
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  void reject_unknown() const {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError("config: unknown key '" + path(it.key()) + "'");
    }
  }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> used_;
};

json num_or_inf(double x) {
  return std::isinf(x) ? json("inf") : json(x);
}

}  // namespace

std::size_t DatasetConfig::record_every() const {
  const double r = sample_dt / dt;
  const double k = std::round(r);
  if (!(sample_dt > 0) || k < 1 || std::abs(r - k) > 1e-9 * r) {
    throw ConfigError("dataset.sample_dt must be a positive integer multiple of dataset.dt");
  }
  return static_cast<std::size_t>(k);
}

std::size_t DatasetConfig::stride_x() const {
  if (sample_nx == 0 || grid.n % sample_nx != 0) throw ConfigError("dataset.sample_nx must divide dataset.n");
  return grid.n / sample_nx;
}

std::vector<std::size_t> DatasetConfig::observed() const {
  if (obs_indices.empty()) return pde::observed_preset(obs_preset, sample_nx);
  std::vector<std::size_t> out;
  for (std::size_t i : obs_indices) {
    if (i == 0 || i > sample_nx) throw ConfigError("dataset.obs_indices are 1-based and must be <= sample_nx");
    out.push_back(i - 1);
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] <= out[i - 1]) throw ConfigError("dataset.obs_indices must be strictly increasing");
  }
  return out;
}

void DatasetConfig::validate() const {
  try {
    grid.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("dataset.n / dataset.length: ") + e.what());
  }
  if (!(dt > 0)) throw ConfigError("dataset.dt must be positive");
  if (!(t_final > 0)) throw ConfigError("dataset.t_final must be positive");
  if (pde == pde::Equation::Burgers && nu < 0) throw ConfigError("dataset.nu must be >= 0");
  const std::size_t every = record_every();
  pde::SolveConfig sc{dt, t_final, every, nu};
  try {
    sc.validate();
  } catch (const ConfigError&) {
    throw ConfigError("dataset.t_final must be an integer multiple of dataset.sample_dt");
  }
  stride_x();
  if (!num::is_power_of_two(sample_nx)) throw ConfigError("dataset.sample_nx must be a power of two");
  const auto obs = observed();
  if (obs.size() >= sample_nx) throw ConfigError("dataset: observed count d1 must be < d");
  if (noise_std < 0) throw ConfigError("dataset.noise_std must be >= 0");
  if (initial != "grf" && initial != "preset") throw ConfigError("dataset.initial must be 'grf' or 'preset'");
  if (initial == "preset" && pde != pde::Equation::KuramotoSivashinsky) {
    throw ConfigError("dataset.initial = 'preset' is only defined for the KS equation");
  }
  if (initial == "grf" && (train_trajectories == 0 || test_trajectories == 0)) {
    throw ConfigError("dataset.train_trajectories and dataset.test_trajectories must be >= 1");
  }
  if (initial == "preset" && !(train_fraction > 0 && train_fraction < 1)) {
    throw ConfigError("dataset.train_fraction must be in (0, 1)");
  }
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("name must be non-empty");
  dataset.validate();
  if (model.dv == 0) throw ConfigError("model.dv must be >= 1");
  train.validate();
  if (uq.epochs == 0 || uq.batch_size == 0 || uq.iters_per_epoch == 0) {
    throw ConfigError("uq.epochs, uq.batch_size and uq.iters_per_epoch must be >= 1");
  }
  if (!(uq.learning_rate > 0)) throw ConfigError("uq.learning_rate must be positive");
  if (enkf.members < 2) throw ConfigError("enkf.members must be >= 2");
  if (!(enkf.inflation >= 1.0)) throw ConfigError("enkf.inflation must be >= 1");
  if (!(enkf.localization > 0)) throw ConfigError("enkf.localization must be positive");
  if (enkf.grid_n != 0) {
    if (!num::is_power_of_two(enkf.grid_n) || enkf.grid_n < dataset.sample_nx) {
      throw ConfigError("enkf.grid_n must be a power of two >= dataset.sample_nx");
    }
  }
  const double r = dataset.sample_dt / enkf.dt;
  if (!(enkf.dt > 0) || std::abs(r - std::round(r)) > 1e-9 * r || std::round(r) < 1) {
    throw ConfigError("dataset.sample_dt must be an integer multiple of enkf.dt");
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["seed"] = seed;
  j["checkpoint_every"] = checkpoint_every;
  const auto& d = dataset;
  j["dataset"] = {{"pde", pde::to_string(d.pde)},
                  {"length", d.grid.length},
                  {"n", d.grid.n},
                  {"dt", d.dt},
                  {"t_final", d.t_final},
                  {"nu", d.nu},
                  {"sample_dt", d.sample_dt},
                  {"sample_nx", d.sample_nx},
                  {"noise_std", d.noise_std},
                  {"obs_preset", d.obs_preset},
                  {"obs_indices", d.obs_indices},
                  {"initial", d.initial},
                  {"grf_amplitude", d.grf.amplitude},
                  {"grf_shift", d.grf.shift},
                  {"train_trajectories", d.train_trajectories},
                  {"test_trajectories", d.test_trajectories},
                  {"train_fraction", d.train_fraction}};
  j["model"] = {{"dv", model.dv},
                {"encoder_hidden", model.shape.encoder_hidden},
                {"decoder_hidden", model.shape.decoder_hidden},
                {"eta_hidden", model.shape.eta_hidden}};
  const auto& t = train;
  const auto w = [](const std::optional<double>& x) { return x ? json(*x) : json("default"); };
  j["train"] = {{"n_s", t.n_s},
                {"n_l", t.n_l},
                {"n_b", t.n_b},
                {"lambda_ae", w(t.lambda_ae)},
                {"lambda_u", w(t.lambda_u)},
                {"lambda_v", w(t.lambda_v)},
                {"lambda_da", w(t.lambda_da)},
                {"learning_rate", t.learning_rate},
                {"final_lr_fraction", t.final_lr_fraction},
                {"stage1_epochs", t.stage1_epochs},
                {"stage2_epochs", t.stage2_epochs},
                {"iters_per_epoch", t.iters_per_epoch},
                {"batch_size", t.batch_size},
                {"grad_clip", t.grad_clip},
                {"sigma2_mode", t.sigma2_mode == train::Sigma2Mode::Fixed ? "fixed" : "trainable"}};
  j["uq"] = {{"hidden", uq.hidden},
             {"epochs", uq.epochs},
             {"iters_per_epoch", uq.iters_per_epoch},
             {"batch_size", uq.batch_size},
             {"learning_rate", uq.learning_rate}};
  j["enkf"] = {{"members", enkf.members},
               {"inflation", enkf.inflation},
               {"localization", num_or_inf(enkf.localization)},
               {"obs_std", enkf.obs_std},
               {"grid_n", enkf.grid_n},
               {"dt", enkf.dt}};
  j["eval"] = {{"warmup", eval.warmup}, {"max_steps", eval.max_steps}};
  return j.dump(2);
}

namespace {

ExperimentConfig from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config: top level must be a table");
  ExperimentConfig c;
  Section top(root, "");
  top.read("name", c.name);
  top.read("seed", c.seed);
  top.read("checkpoint_every", c.checkpoint_every);
  for (const char* s : {"dataset", "model", "train", "uq", "enkf", "eval"}) top.read(s, *std::make_unique<json>());
  top.reject_unknown();

  Section ds(root, "dataset");
  std::string pde = pde::to_string(c.dataset.pde);
  ds.read("pde", pde);
  c.dataset.pde = pde::parse_equation(pde);
  if (c.dataset.pde == pde::Equation::KuramotoSivashinsky) {
    // KS defaults: L = 22, dt = 0.025, unit sampling on 128 points.
    c.dataset.grid = {22.0, 128};
    c.dataset.dt = 0.025;
    c.dataset.sample_dt = 1.0;
    c.dataset.sample_nx = 128;
    c.dataset.obs_preset = "ks";
    c.dataset.initial = "preset";
    c.dataset.t_final = 1000.0;
  }
  ds.read_double("length", c.dataset.grid.length);
  ds.read("n", c.dataset.grid.n);
  ds.read_double("dt", c.dataset.dt);
  ds.read_double("t_final", c.dataset.t_final);
  ds.read_double("nu", c.dataset.nu);
  ds.read_double("sample_dt", c.dataset.sample_dt);
  ds.read("sample_nx", c.dataset.sample_nx);
  ds.read_double("noise_std", c.dataset.noise_std);
  ds.read("obs_preset", c.dataset.obs_preset);
  ds.read("obs_indices", c.dataset.obs_indices);
  ds.read("initial", c.dataset.initial);
  ds.read_double("grf_amplitude", c.dataset.grf.amplitude);
  ds.read_double("grf_shift", c.dataset.grf.shift);
  ds.read("train_trajectories", c.dataset.train_trajectories);
  ds.read("test_trajectories", c.dataset.test_trajectories);
  ds.read_double("train_fraction", c.dataset.train_fraction);
  ds.reject_unknown();

  Section md(root, "model");
  md.read("dv", c.model.dv);
  md.read("encoder_hidden", c.model.shape.encoder_hidden);
  md.read("decoder_hidden", c.model.shape.decoder_hidden);
  md.read("eta_hidden", c.model.shape.eta_hidden);
  md.reject_unknown();

  Section tr(root, "train");
  tr.read("n_s", c.train.n_s);
  tr.read("n_l", c.train.n_l);
  tr.read("n_b", c.train.n_b);
  tr.read_optional("lambda_ae", c.train.lambda_ae);
  tr.read_optional("lambda_u", c.train.lambda_u);
  tr.read_optional("lambda_v", c.train.lambda_v);
  tr.read_optional("lambda_da", c.train.lambda_da);
  tr.read_double("learning_rate", c.train.learning_rate);
  tr.read_double("final_lr_fraction", c.train.final_lr_fraction);
  tr.read("stage1_epochs", c.train.stage1_epochs);
  tr.read("stage2_epochs", c.train.stage2_epochs);
  tr.read("iters_per_epoch", c.train.iters_per_epoch);
  tr.read("batch_size", c.train.batch_size);
  tr.read_double("grad_clip", c.train.grad_clip);
  std::string mode = "fixed";
  tr.read("sigma2_mode", mode);
  if (mode == "fixed") {
    c.train.sigma2_mode = train::Sigma2Mode::Fixed;
  } else if (mode == "trainable") {
    c.train.sigma2_mode = train::Sigma2Mode::Trainable;
  } else {
    throw ConfigError("train.sigma2_mode must be 'fixed' or 'trainable'");
  }
  tr.reject_unknown();

  Section uq(root, "uq");
  uq.read("hidden", c.uq.hidden);
  uq.read("epochs", c.uq.epochs);
  uq.read("iters_per_epoch", c.uq.iters_per_epoch);
  uq.read("batch_size", c.uq.batch_size);
  uq.read_double("learning_rate", c.uq.learning_rate);
  uq.reject_unknown();

  Section en(root, "enkf");
  en.read("members", c.enkf.members);
  en.read_double("inflation", c.enkf.inflation);
  en.read_double("localization", c.enkf.localization);
  en.read_double("obs_std", c.enkf.obs_std);
  en.read("grid_n", c.enkf.grid_n);
  en.read_double("dt", c.enkf.dt);
  en.reject_unknown();

  Section ev(root, "eval");
  c.eval.warmup = c.train.n_b;
  ev.read("warmup", c.eval.warmup);
  ev.read("max_steps", c.eval.max_steps);
  ev.reject_unknown();
  return c;
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(root);
}

ExperimentConfig parse_config_toml(const std::string& text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config: invalid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  return from_json(toml_to_json(t));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return path.extension() == ".toml" ? parse_config_toml(ss.str()) : parse_config_json(ss.str());
}

}  // namespace cgkoop::app
