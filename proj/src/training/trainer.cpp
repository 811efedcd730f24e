#include "cgkoop/training/trainer.hpp"

#include <chrono>
#include <numbers>
#include <cmath>
#include <string>

#include "cgkoop/autodiff/ops.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/linalg.hpp"
#include "cgkoop/numcore/parallel.hpp"
#include "cgkoop/training/losses.hpp"

namespace cgkoop::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Tensor take_rows(const Tensor& block, std::size_t first, std::size_t count) {
  const std::size_t n = block.cols();
  return num::slice(block, first * n, count * n).reshaped({count, n});
}

template <class V>
void shuffle(std::vector<V>& xs, num::RngStream& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng.below(i)]);
}

struct Window {
  std::size_t traj = 0;
  std::size_t start = 0;
};

struct Element {
  Window segment;
  std::optional<Window> da;
};

struct ElementResult {
  double l_ae = 0, l_u = 0, l_v = 0, l_da = 0;
  std::vector<Tensor> grads;
};

ElementResult eval_element(const CGKNParams& p, const TrainingSet& data, const TrainConfig& cfg, const LossWeights& w,
                           const Element& e) {
  ad::Tape tape;
  const model::BoundParams b = model::bind(tape, p, cfg.sigma2_mode == Sigma2Mode::Trainable);
  const auto& seg = e.segment;
  const ad::Var u1 = tape.constant(take_rows(data.u1[seg.traj], seg.start, cfg.n_s + 1));
  const ad::Var u2 = tape.constant(take_rows(data.u2[seg.traj], seg.start, cfg.n_s + 1));
  const ad::Var ae = loss_ae(b.view, u2, w.ae);
  const auto fc = loss_forecast(b.view, u1, u2, w.u, w.v);
  ad::Var total = ad::add(ad::add(ae, fc.u), fc.v);
  ElementResult r;
  r.l_ae = ae.value().item();
  r.l_u = fc.u.value().item();
  r.l_v = fc.v.value().item();
  if (e.da) {
    const ad::Var wu1 = tape.constant(take_rows(data.u1[e.da->traj], e.da->start, cfg.n_l + 1));
    const ad::Var wu2 = tape.constant(take_rows(data.u2[e.da->traj], e.da->start, cfg.n_l + 1));
    const ad::Var da = loss_da(b.view, wu1, wu2, cfg.n_b, w.da);
    r.l_da = da.value().item();
    total = ad::add(total, da);
  }
  tape.backward(total);
  r.grads.reserve(b.leaves.size());
  for (const ad::Var& leaf : b.leaves) r.grads.push_back(tape.grad(leaf));
  return r;
}

bool finite(double x) { return std::isfinite(x); }

CGKNParams run_stage(int stage, CGKNParams p, const TrainingSet& data, const TrainConfig& cfg,
                     std::vector<EpochLog>& log, const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t T = data.length();
  if (T < cfg.n_s + 1) throw ConfigError("train: trajectories shorter than one forecast segment");
  if (stage == 2 && T < cfg.n_l + 1) throw ConfigError("train: trajectories shorter than one DA window");
  const LossWeights w = cfg.weights(data.spec);
  const bool sig2 = stage == 2 && cfg.sigma2_mode == Sigma2Mode::Trainable;
  TrainConfig run_cfg = cfg;
  if (!sig2) run_cfg.sigma2_mode = Sigma2Mode::Fixed;
  const std::size_t epochs = stage == 1 ? cfg.stage1_epochs : cfg.stage2_epochs;

  std::vector<Window> windows;
  if (stage == 2) {
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (std::size_t t = 0; t + cfg.n_l <= T - 1; t += cfg.n_l) windows.push_back({s, t});
    }
  }
  std::size_t next_window = 0;

  Adam opt(cfg.learning_rate);
  const auto t0 = Clock::now();
  const std::string tag = stage == 1 ? "stage1" : "stage2";
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    num::RngStream rng(num::derive_seed(cfg.seed, tag, epoch));
    // One schedule spans stage 1 then stage 2, so stage 2 starts where stage 1 left off.
    const double total_epochs = static_cast<double>(cfg.stage1_epochs + cfg.stage2_epochs);
    const double at = static_cast<double>(stage == 1 ? epoch : cfg.stage1_epochs + epoch);
    const double phase = 0.5 * (1.0 + std::cos(std::numbers::pi * at / total_epochs));
    opt.set_learning_rate(cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * phase));
    if (stage == 2) {
      shuffle(windows, rng);
      next_window = 0;
    }
    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t it = 0; it < cfg.iters_per_epoch; ++it) {
      std::vector<Element> batch(cfg.batch_size);
      for (auto& e : batch) {
        e.segment = {rng.below(data.size()), rng.below(T - cfg.n_s)};
        if (stage == 2) {
          e.da = windows[next_window];
          next_window = (next_window + 1) % windows.size();
        }
      }
      std::vector<ElementResult> results(batch.size());
      num::parallel_for(batch.size(), cfg.threads,
                        [&](std::size_t i) { results[i] = eval_element(p, data, run_cfg, w, batch[i]); });

      std::vector<Tensor> grads = std::move(results[0].grads);
      double l_ae = results[0].l_ae, l_u = results[0].l_u, l_v = results[0].l_v, l_da = results[0].l_da;
      for (std::size_t i = 1; i < results.size(); ++i) {
        for (std::size_t k = 0; k < grads.size(); ++k) {
          auto dst = grads[k].data();
          const auto src = results[i].grads[k].data();
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        l_ae += results[i].l_ae;
        l_u += results[i].l_u;
        l_v += results[i].l_v;
        l_da += results[i].l_da;
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto& g : grads) g = num::scale(g, inv);
      const double total = (l_ae + l_u + l_v + l_da) * inv;
      if (!finite(total)) {
        throw DivergenceError("train: non-finite loss in stage " + std::to_string(stage) + ", epoch " +
                                  std::to_string(epoch) + ", iteration " + std::to_string(it),
                              epoch);
      }
      const double norm = clip_global_norm(grads, cfg.grad_clip);
      if (!finite(norm)) {
        throw DivergenceError("train: non-finite gradient in stage " + std::to_string(stage) + ", epoch " +
                                  std::to_string(epoch) + ", iteration " + std::to_string(it),
                              epoch);
      }
      opt.step(model::trainable_tensors(p, sig2), grads);
      entry.l_ae += l_ae * inv;
      entry.l_u += l_u * inv;
      entry.l_v += l_v * inv;
      entry.l_da += l_da * inv;
      entry.grad_norm += norm;
    }
    const double k = 1.0 / static_cast<double>(cfg.iters_per_epoch);
    entry.l_ae *= k;
    entry.l_u *= k;
    entry.l_v *= k;
    entry.l_da *= k;
    entry.grad_norm *= k;
    entry.total = entry.l_ae + entry.l_u + entry.l_v + entry.l_da;
    entry.wall_time_s = seconds_since(t0);
    log.push_back(entry);
    if (hooks.on_epoch) {
      CGKNParams snapshot = p;
      for (double& s : snapshot.sigma2.data()) s = std::abs(s);
      hooks.on_epoch(stage, entry, snapshot);
    }
  }
  for (double& s : p.sigma2.data()) s = std::abs(s);
  return p;
}

}  // namespace

LossWeights LossWeights::defaults(const StateSpec& s) {
  return {1.0 / static_cast<double>(s.d2()), 1.0 / static_cast<double>(s.d), 1.0 / static_cast<double>(s.dv),
          1.0 / static_cast<double>(s.d2())};
}

void TrainConfig::validate() const {
  if (n_s < 1) throw ConfigError("train.n_s must be at least 1");
  if (n_l <= n_b) throw ConfigError("train.n_b must be smaller than train.n_l");
  for (const auto& l : {lambda_ae, lambda_u, lambda_v, lambda_da}) {
    if (l && !(*l >= 0.0)) throw ConfigError("train: loss weights must be nonnegative");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("train.final_lr_fraction must be in (0, 1]");
  }
  if (iters_per_epoch == 0) throw ConfigError("train.iters_per_epoch must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (grad_clip < 0.0) throw ConfigError("train.grad_clip must be nonnegative");
}

LossWeights TrainConfig::weights(const StateSpec& s) const {
  LossWeights w = LossWeights::defaults(s);
  if (lambda_ae) w.ae = *lambda_ae;
  if (lambda_u) w.u = *lambda_u;
  if (lambda_v) w.v = *lambda_v;
  if (lambda_da) w.da = *lambda_da;
  return w;
}

TrainingSet TrainingSet::from_states(const StateSpec& spec, const Tensor& states) {
  TrainingSet set;
  set.spec = spec;
  std::size_t s = 1, t = 0;
  if (states.rank() == 3) {
    s = states.dim(0);
    t = states.dim(1);
  } else if (states.rank() == 2) {
    t = states.dim(0);
  } else {
    throw ShapeError("training set: expected [S x T x d] or [T x d], got " + states.shape_string());
  }
  if (states.dims().back() != spec.d) throw ShapeError("training set: state width does not match d");
  if (t < 2) throw ShapeError("training set: trajectories need at least two states");
  for (std::size_t i = 0; i < s; ++i) {
    const Tensor traj = num::slice(states, i * t * spec.d, t * spec.d).reshaped({t, spec.d});
    set.u1.push_back(spec.observed_part(traj));
    set.u2.push_back(spec.unobserved_part(traj));
  }
  return set;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ContractError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(num::scale(*p, 0.0));
      v_.push_back(num::scale(*p, 0.0));
    }
  }
  if (m_.size() != params.size()) throw ContractError("adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    const auto g = grads[k].data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    if (g.size() != p.size()) throw ShapeError("adam: gradient shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
      v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g.data()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g.data()) x *= s;
    }
  }
  return norm;
}

double loss_ae(const CGKNParams& p, const Tensor& u2_rows, double lambda) {
  return loss_ae(model::view(p), u2_rows, lambda).item();
}

ForecastLosses loss_forecast(const CGKNParams& p, const Tensor& u1_rows, const Tensor& u2_rows, double lambda_u,
                             double lambda_v) {
  const auto l = loss_forecast(model::view(p), u1_rows, u2_rows, lambda_u, lambda_v);
  if (!std::isfinite(l.u.item()) || !std::isfinite(l.v.item())) {
    throw DivergenceError("loss_forecast: non-finite rollout", u1_rows.rows() - 1);
  }
  return {l.u.item(), l.v.item()};
}

double loss_da(const CGKNParams& p, const Tensor& u1_rows, const Tensor& u2_rows, std::size_t n_b, double lambda) {
  return loss_da(model::view(p), u1_rows, u2_rows, n_b, lambda).item();
}

SigmaEstimate estimate_sigma(const CGKNParams& p, const TrainingSet& data) {
  const StateSpec& s = p.spec;
  const auto mv = model::view(p);
  std::vector<double> e1(s.d1(), 0.0), e2(s.dv, 0.0);
  std::size_t count = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::size_t T = data.u1[k].rows();
    const Tensor v = model::forward(mv.encoder, data.u2[k]);
    const Tensor eta = model::forward(mv.eta, take_rows(data.u1[k], 0, T - 1));
    for (std::size_t n = 0; n + 1 < T; ++n) {
      const auto c = model::unpack(eta, n * s.coeff_size(), s);
      const auto pred = model::step_mean(c, model::row_as_column(v, n, s.dv));
      for (std::size_t j = 0; j < s.d1(); ++j) {
        const double r = data.u1[k](n + 1, j) - pred.u1[j];
        e1[j] += r * r;
      }
      for (std::size_t j = 0; j < s.dv; ++j) {
        const double r = v(n + 1, j) - pred.v[j];
        e2[j] += r * r;
      }
      ++count;
    }
  }
  SigmaEstimate out{Tensor({s.d1()}), Tensor({s.dv})};
  for (std::size_t j = 0; j < s.d1(); ++j) out.sigma1[j] = std::sqrt(e1[j] / static_cast<double>(count));
  for (std::size_t j = 0; j < s.dv; ++j) out.sigma2[j] = std::sqrt(e2[j] / static_cast<double>(count));
  return out;
}

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,L_AE,L_u,L_v,L_DA,total,grad_norm,wall_time_s\n";
  os.precision(10);
  for (const auto& e : log) {
    os << e.epoch << ',' << e.l_ae << ',' << e.l_u << ',' << e.l_v << ',' << e.l_da << ',' << e.total << ','
       << e.grad_norm << ',' << e.wall_time_s << '\n';
  }
}

CGKNParams train_stage1(CGKNParams p, const TrainingSet& data, const TrainConfig& cfg, std::vector<EpochLog>& log,
                        const TrainHooks& hooks) {
  return run_stage(1, std::move(p), data, cfg, log, hooks);
}

CGKNParams train_stage2(CGKNParams p, const TrainingSet& data, const TrainConfig& cfg, std::vector<EpochLog>& log,
                        const TrainHooks& hooks) {
  return run_stage(2, std::move(p), data, cfg, log, hooks);
}

TrainResult train_cgkn(CGKNParams init, const TrainingSet& data, const TrainConfig& cfg, const TrainHooks& hooks,
                       const CGKNParams* resume) {
  cfg.validate();
  init.validate();
  TrainResult out;
  CGKNParams p;
  if (resume) {
    p = *resume;
  } else {
    p = train_stage1(std::move(init), data, cfg, out.stage1, hooks);
    const SigmaEstimate est = estimate_sigma(p, data);
    p.sigma1 = est.sigma1;
    p.sigma2 = est.sigma2;
    if (hooks.on_stage1_done) hooks.on_stage1_done(p);
  }
  out.params = train_stage2(std::move(p), data, cfg, out.stage2, hooks);
  return out;
}

ResidualSamples collect_residuals(const CGKNParams& p, const TrainingSet& data, std::size_t n_b) {
  const StateSpec& s = p.spec;
  const auto mv = model::view(p);
  std::vector<double> u1, r;
  std::size_t m = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::size_t n = data.u1[k].rows() - 1;
    if (n <= n_b) continue;
    model::Belief<Tensor> init{Tensor::matrix(s.dv, 1), Tensor::identity(s.dv)};
    const auto beliefs = model::cg_filter(mv, data.u1[k], init, n);
    std::vector<Tensor> means;
    for (std::size_t i = n_b; i < n; ++i) means.push_back(beliefs[i].mu);
    const Tensor decoded = model::forward(mv.decoder, stack_rows(means, s.dv));
    for (std::size_t i = 0; i < means.size(); ++i) {
      const std::size_t t = n_b + 1 + i;
      for (std::size_t j = 0; j < s.d1(); ++j) u1.push_back(data.u1[k](t, j));
      for (std::size_t j = 0; j < s.d2(); ++j) r.push_back(std::abs(data.u2[k](t, j) - decoded(i, j)));
      ++m;
    }
  }
  if (m == 0) throw ContractError("collect_residuals: no post-warm-up steps");
  return {Tensor::matrix(m, s.d1(), std::move(u1)), Tensor::matrix(m, s.d2(), std::move(r))};
}

Mlp train_uq(const ResidualSamples& samples, const UqConfig& cfg) {
  const std::size_t m = samples.u1.rows(), d1 = samples.u1.cols(), d2 = samples.r.cols();
  if (samples.r.rows() != m) throw ShapeError("train_uq: sample counts differ");
  num::RngStream init_rng(num::derive_seed(cfg.seed, "uq-init"));
  std::vector<std::size_t> widths{d1};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(d2);
  Mlp net = Mlp::glorot(widths, init_rng);
  net.output = model::OutputTransform::Softplus;
  // Start as the constant mean-residual predictor.
  for (double& w : net.weights.back().data()) w = 0.0;
  for (std::size_t j = 0; j < d2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += samples.r(i, j);
    mean /= static_cast<double>(m);
    net.biases.back()[j] = mean > 1e-8 ? std::log(std::expm1(mean)) : -12.0;
  }
  std::vector<Tensor*> params;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    params.push_back(&net.weights[l]);
    params.push_back(&net.biases[l]);
  }
  Adam opt(cfg.learning_rate);
  const std::size_t b = std::min(cfg.batch_size, m);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    num::RngStream rng(num::derive_seed(cfg.seed, "uq", epoch));
    for (std::size_t it = 0; it < cfg.iters_per_epoch; ++it) {
      Tensor x = Tensor::matrix(b, d1), y = Tensor::matrix(b, d2);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t k = rng.below(m);
        for (std::size_t j = 0; j < d1; ++j) x(i, j) = samples.u1(k, j);
        for (std::size_t j = 0; j < d2; ++j) y(i, j) = samples.r(k, j);
      }
      ad::Tape tape;
      model::MlpView<ad::Var> v;
      v.hidden = net.hidden;
      v.output = net.output;
      std::vector<ad::Var> leaves;
      for (std::size_t l = 0; l < net.layers(); ++l) {
        v.weights.push_back(tape.variable(net.weights[l]));
        v.biases.push_back(tape.variable(net.biases[l]));
        leaves.push_back(v.weights.back());
        leaves.push_back(v.biases.back());
      }
      const ad::Var pred = model::forward(v, tape.constant(std::move(x)));
      const ad::Var loss = ad::mean(ad::square(ad::sub(pred, tape.constant(std::move(y)))));
      tape.backward(loss);
      if (!std::isfinite(loss.value().item())) throw DivergenceError("train_uq: non-finite loss", epoch);
      std::vector<Tensor> grads;
      for (const auto& leaf : leaves) grads.push_back(tape.grad(leaf));
      opt.step(params, grads);
    }
  }
  return net;
}

void fit_autoencoder(CGKNParams& p, const Tensor& u2_rows, std::size_t steps, std::size_t batch_size, double lr,
                     std::uint64_t seed) {
  const std::size_t m = u2_rows.rows(), d2 = p.spec.d2();
  const std::size_t n_ae = 2 * (p.encoder.layers() + p.decoder.layers());
  std::vector<Tensor*> params = model::trainable_tensors(p, false);
  params.resize(n_ae);
  Adam opt(lr);
  const std::size_t b = std::min(batch_size, m);
  num::RngStream rng(num::derive_seed(seed, "autoencoder"));
  for (std::size_t it = 0; it < steps; ++it) {
    Tensor x = Tensor::matrix(b, d2);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t k = rng.below(m);
      for (std::size_t j = 0; j < d2; ++j) x(i, j) = u2_rows(k, j);
    }
    ad::Tape tape;
    const auto bound = model::bind(tape, p, false);
    const ad::Var loss = loss_ae(bound.view, tape.constant(std::move(x)), 1.0 / static_cast<double>(d2));
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (std::size_t k = 0; k < n_ae; ++k) grads.push_back(tape.grad(bound.leaves[k]));
    opt.step(params, grads);
  }
}

}  // namespace cgkoop::train
