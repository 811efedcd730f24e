#include "cgkoop/model/cgkn.hpp"

#include <fstream>
#include <map>

#include "json.hpp"

#include "cgkoop/autodiff/ops.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/cgt_io.hpp"
#include "cgkoop/numcore/linalg.hpp"

namespace cgkoop::model {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

void check_net(const Mlp& m, const char* name, std::size_t in, std::size_t out) {
  const std::string n(name);
  if (m.weights.empty() || m.weights.size() != m.biases.size()) throw ConfigError(n + ": malformed layer list");
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.weights[l].rank() != 2) throw ConfigError(n + ": weights must be matrices");
    if (m.biases[l].size() != m.weights[l].cols()) throw ConfigError(n + ": bias width mismatch at layer " + std::to_string(l));
    if (l > 0 && m.weights[l].rows() != m.weights[l - 1].cols()) {
      throw ConfigError(n + ": layer " + std::to_string(l) + " does not chain");
    }
  }
  if (m.in_dim() != in) throw ConfigError(n + ": input width " + std::to_string(m.in_dim()) + ", expected " + std::to_string(in));
  if (m.out_dim() != out) {
    throw ConfigError(n + ": output width " + std::to_string(m.out_dim()) + ", expected " + std::to_string(out));
  }
}

// Single vector [n] (or [1 × n] / [n × 1]) -> [1 × n] row; batches pass through.
Tensor as_rows(const Tensor& x, std::size_t n, const char* what) {
  if (x.rank() == 2 && x.cols() == n) return x;
  if (x.size() == n) return x.reshaped({1, n});
  throw ShapeError(std::string(what) + ": expected width " + std::to_string(n) + ", got " + x.shape_string());
}

Tensor column(const Tensor& x, std::size_t n, const char* what) {
  if (x.size() != n) throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) + ", got " + x.shape_string());
  return x.reshaped({n, 1});
}

Tensor flat(const Tensor& x) { return x.reshaped({x.size()}); }

Tensor diag_square(const Tensor& s) {
  Tensor d = num::diag_embed(s);
  for (std::size_t i = 0; i < s.size(); ++i) d(i, i) = s[i] * s[i];
  return d;
}

}  // namespace

CGKNParams CGKNParams::create(const StateSpec& spec, const ModelShape& shape, num::RngStream& rng) {
  spec.validate();
  CGKNParams p;
  p.spec = spec;
  p.encoder = Mlp::glorot(chain(spec.d2(), shape.encoder_hidden, spec.dv), rng);
  p.decoder = Mlp::glorot(chain(spec.dv, shape.decoder_hidden, spec.d2()), rng);
  p.eta = Mlp::glorot(chain(spec.d1(), shape.eta_hidden, spec.coeff_size()), rng);
  p.encoder.hidden = p.decoder.hidden = p.eta.hidden = shape.activation;
  p.sigma1 = Tensor({spec.d1()}, 0.0);
  p.sigma2 = Tensor({spec.dv}, 0.0);
  return p;
}

void CGKNParams::validate() const {
  spec.validate();
  check_net(encoder, "encoder", spec.d2(), spec.dv);
  check_net(decoder, "decoder", spec.dv, spec.d2());
  check_net(eta, "eta", spec.d1(), spec.coeff_size());
  if (sigma1.size() != spec.d1()) throw ConfigError("sigma1: expected " + std::to_string(spec.d1()) + " entries");
  if (sigma2.size() != spec.dv) throw ConfigError("sigma2: expected " + std::to_string(spec.dv) + " entries");
  for (double s : sigma1.data()) {
    if (!(s >= 0.0)) throw ConfigError("sigma1 entries must be nonnegative");
  }
  for (double s : sigma2.data()) {
    if (!(s >= 0.0)) throw ConfigError("sigma2 entries must be nonnegative");
  }
}

std::size_t CGKNParams::parameter_count() const noexcept {
  return encoder.parameter_count() + decoder.parameter_count() + eta.parameter_count();
}

Tensor pack(const CGCoeffs& c) {
  const std::vector<Tensor> parts{flat(c.F1), flat(c.G1), flat(c.F2), flat(c.G2)};
  std::vector<double> data;
  for (const auto& t : parts) data.insert(data.end(), t.data().begin(), t.data().end());
  const std::size_t n = data.size();
  return Tensor::matrix(1, n, std::move(data));
}

Mlp constant_eta(const StateSpec& spec, const CGCoeffs& c) {
  Tensor b = pack(c);
  if (b.size() != spec.coeff_size()) throw ShapeError("constant_eta: coefficients do not match the state spec");
  Mlp m = Mlp::zeros({spec.d1(), spec.coeff_size()});
  m.biases[0] = std::move(b);
  m.hidden = Activation::Identity;
  return m;
}

Mlp affine_net(const Tensor& w, const Tensor& b) {
  Mlp m = Mlp::zeros({w.rows(), w.cols()});
  m.weights[0] = w;
  m.biases[0] = b.reshaped({1, w.cols()});
  m.hidden = Activation::Identity;
  return m;
}

Tensor encode(const CGKNParams& p, const Tensor& u2) {
  const Tensor v = forward(view(p.encoder), as_rows(u2, p.spec.d2(), "encode"));
  return u2.rank() == 2 && u2.cols() == p.spec.d2() ? v : flat(v);
}

Tensor decode(const CGKNParams& p, const Tensor& v) {
  const Tensor u2 = forward(view(p.decoder), as_rows(v, p.spec.dv, "decode"));
  return v.rank() == 2 && v.cols() == p.spec.dv ? u2 : flat(u2);
}

CGCoeffs coeffs(const CGKNParams& p, const Tensor& u1) {
  const Tensor out = forward(view(p.eta), as_rows(u1, p.spec.d1(), "coeffs"));
  if (out.size() != p.spec.coeff_size()) {
    throw ConfigError("coeffs: eta emits " + std::to_string(out.size()) + " values, expected " +
                      std::to_string(p.spec.coeff_size()));
  }
  return unpack(out, 0, p.spec);
}

StepResult step_mean(const CGKNParams& p, const Tensor& u1, const Tensor& v) {
  const Step<Tensor> s = model::step_mean(coeffs(p, u1), column(v, p.spec.dv, "step_mean"));
  return {flat(s.u1), flat(s.v)};
}

StepResult step_sample(const CGKNParams& p, const Tensor& u1, const Tensor& v, num::RngStream& rng) {
  StepResult s = step_mean(p, u1, v);
  for (std::size_t i = 0; i < s.u1.size(); ++i) s.u1[i] += p.sigma1[i] * rng.normal();
  for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += p.sigma2[i] * rng.normal();
  return s;
}

Tensor forecast(const CGKNParams& p, const Tensor& initial, std::size_t n_steps) {
  if (n_steps == 0) throw ContractError("forecast: n_steps must be at least 1");
  const StateSpec& s = p.spec;
  const Tensor u0 = as_rows(initial, s.d, "forecast");
  if (u0.rows() != 1) throw ShapeError("forecast: expected a single initial state");
  Tensor u1 = s.observed_part(u0).reshaped({s.d1(), 1});
  Tensor v = forward(view(p.encoder), s.unobserved_part(u0)).reshaped({s.dv, 1});
  const ModelView<Tensor> mv = view(p);
  Tensor out = Tensor::matrix(n_steps, s.d);
  for (std::size_t n = 0; n < n_steps; ++n) {
    const Tensor eta_out = forward(mv.eta, u1.reshaped({1, s.d1()}));
    Step<Tensor> next = model::step_mean(unpack(eta_out, 0, s), v);
    u1 = std::move(next.u1);
    v = std::move(next.v);
    const Tensor u2 = forward(mv.decoder, v.reshaped({1, s.dv}));
    if (!u1.all_finite() || !v.all_finite() || !u2.all_finite()) {
      throw DivergenceError("forecast: non-finite state at step " + std::to_string(n + 1), n + 1);
    }
    for (std::size_t j = 0; j < s.d1(); ++j) out(n, s.observed[j]) = u1[j];
    for (std::size_t j = 0; j < s.d2(); ++j) out(n, s.unobserved()[j]) = u2[j];
  }
  return out;
}

ModelView<Tensor> view(const CGKNParams& p) {
  ModelView<Tensor> m;
  m.spec = &p.spec;
  m.encoder = view(p.encoder);
  m.decoder = view(p.decoder);
  m.eta = view(p.eta);
  m.s1 = diag_square(p.sigma1);
  m.s2 = diag_square(p.sigma2);
  return m;
}

namespace {

MlpView<ad::Var> bind_net(ad::Tape& tape, const Mlp& m, std::vector<ad::Var>& leaves) {
  MlpView<ad::Var> v;
  v.hidden = m.hidden;
  v.output = m.output;
  for (std::size_t l = 0; l < m.layers(); ++l) {
    v.weights.push_back(tape.variable(m.weights[l]));
    v.biases.push_back(tape.variable(m.biases[l]));
    leaves.push_back(v.weights.back());
    leaves.push_back(v.biases.back());
  }
  return v;
}

}  // namespace

BoundParams bind(ad::Tape& tape, const CGKNParams& p, bool sigma2_trainable) {
  BoundParams b;
  b.view.spec = &p.spec;
  b.view.encoder = bind_net(tape, p.encoder, b.leaves);
  b.view.decoder = bind_net(tape, p.decoder, b.leaves);
  b.view.eta = bind_net(tape, p.eta, b.leaves);
  b.view.s1 = tape.constant(diag_square(p.sigma1));
  if (sigma2_trainable) {
    const ad::Var raw = tape.variable(p.sigma2);
    b.leaves.push_back(raw);
    b.view.s2 = ad::diag_embed(ad::square(raw));
  } else {
    b.view.s2 = tape.constant(diag_square(p.sigma2));
  }
  return b;
}

std::vector<Tensor*> trainable_tensors(CGKNParams& p, bool sigma2_trainable) {
  std::vector<Tensor*> out;
  for (Mlp* m : {&p.encoder, &p.decoder, &p.eta}) {
    for (std::size_t l = 0; l < m->layers(); ++l) {
      out.push_back(&m->weights[l]);
      out.push_back(&m->biases[l]);
    }
  }
  if (sigma2_trainable) out.push_back(&p.sigma2);
  return out;
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

constexpr int kCheckpointSchema = 1;

void save_net(const fs::path& dir, const std::string& role, const Mlp& m, json& manifest) {
  manifest["networks"][role] = {{"layers", m.layers()},
                                {"hidden_activation", to_string(m.hidden)},
                                {"output", to_string(m.output)},
                                {"widths", m.widths()}};
  for (std::size_t l = 0; l < m.layers(); ++l) {
    for (const char* kind : {"weight", "bias"}) {
      const bool is_w = std::string(kind) == "weight";
      const std::string file = role + (is_w ? "_w" : "_b") + std::to_string(l) + ".cgt";
      num::write_cgt(dir / file, is_w ? m.weights[l] : m.biases[l]);
      manifest["tensors"].push_back({{"name", role + "." + (is_w ? "w" : "b") + std::to_string(l)},
                                     {"file", file},
                                     {"role", role},
                                     {"layer", l},
                                     {"kind", kind}});
    }
  }
}

Mlp load_net(const fs::path& dir, const std::string& role, const json& manifest) {
  const json& info = manifest.at("networks").at(role);
  const std::size_t layers = info.at("layers").get<std::size_t>();
  Mlp m;
  m.hidden = parse_activation(info.at("hidden_activation").get<std::string>());
  m.output = parse_output_transform(info.at("output").get<std::string>());
  m.weights.resize(layers);
  m.biases.resize(layers);
  std::vector<bool> seen(2 * layers, false);
  for (const json& t : manifest.at("tensors")) {
    if (t.at("role").get<std::string>() != role) continue;
    const std::size_t l = t.at("layer").get<std::size_t>();
    if (l >= layers) throw ConfigError("checkpoint: layer index out of range for " + role);
    const bool is_w = t.at("kind").get<std::string>() == "weight";
    (is_w ? m.weights[l] : m.biases[l]) = num::read_cgt(dir / t.at("file").get<std::string>());
    seen[2 * l + (is_w ? 0 : 1)] = true;
  }
  for (bool s : seen) {
    if (!s) throw ConfigError("checkpoint: missing tensor for " + role);
  }
  return m;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ck) {
  ck.params.validate();
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  json manifest;
  manifest["schema_version"] = kCheckpointSchema;
  manifest["stage"] = ck.stage;
  manifest["spec"] = {{"d", ck.params.spec.d}, {"dv", ck.params.spec.dv}, {"observed", ck.params.spec.observed}};
  manifest["tensors"] = json::array();
  save_net(tmp, "encoder", ck.params.encoder, manifest);
  save_net(tmp, "decoder", ck.params.decoder, manifest);
  save_net(tmp, "eta", ck.params.eta, manifest);
  if (ck.uq) save_net(tmp, "uq", *ck.uq, manifest);
  for (const char* role : {"sigma1", "sigma2"}) {
    const std::string file = std::string(role) + ".cgt";
    num::write_cgt(tmp / file, role == std::string("sigma1") ? ck.params.sigma1 : ck.params.sigma2);
    manifest["tensors"].push_back({{"name", role}, {"file", file}, {"role", role}, {"layer", 0}, {"kind", "diagonal"}});
  }
  std::ofstream(tmp / "manifest.json") << manifest.dump(2) << '\n';
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("checkpoint: no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint: unreadable manifest: " + std::string(e.what()));
  }
  if (manifest.value("schema_version", 0) != kCheckpointSchema) throw ConfigError("checkpoint: unsupported schema version");
  Checkpoint ck;
  ck.stage = manifest.value("stage", 2);
  const json& spec = manifest.at("spec");
  ck.params.spec = StateSpec(spec.at("d").get<std::size_t>(), spec.at("observed").get<std::vector<std::size_t>>(),
                             spec.at("dv").get<std::size_t>());
  ck.params.encoder = load_net(dir, "encoder", manifest);
  ck.params.decoder = load_net(dir, "decoder", manifest);
  ck.params.eta = load_net(dir, "eta", manifest);
  if (manifest.at("networks").contains("uq")) ck.uq = load_net(dir, "uq", manifest);
  ck.params.sigma1 = num::read_cgt(dir / "sigma1.cgt");
  ck.params.sigma2 = num::read_cgt(dir / "sigma2.cgt");
  ck.params.validate();
  return ck;
}

}  // namespace cgkoop::model
