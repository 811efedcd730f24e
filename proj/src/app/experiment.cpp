#include "cgkoop/app/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "cgkoop/enkf/enkf.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/cgt_io.hpp"
#include "cgkoop/numcore/parallel.hpp"
#include "cgkoop/numcore/rng.hpp"
#include "cgkoop/pdelab/grf.hpp"
#include "cgkoop/training/trainer.hpp"

namespace cgkoop::app {

using nlohmann::json;
using num::derive_seed;
using num::RngStream;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void say(const RunContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n' << std::flush;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// [S × T × d] from S equally shaped [T × d] blocks.
Tensor stack(const std::vector<Tensor>& parts) {
  const std::size_t t = parts.front().rows(), d = parts.front().cols();
  std::vector<double> data;
  data.reserve(parts.size() * t * d);
  for (const auto& p : parts) {
    if (p.rows() != t || p.cols() != d) throw ShapeError("stack: ragged trajectories");
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor({parts.size(), t, d}, std::move(data));
}

Tensor rows_of(const Tensor& m, std::size_t begin, std::size_t end) {
  const std::size_t d = m.cols();
  std::vector<double> data(m.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                           m.data().begin() + static_cast<std::ptrdiff_t>(end * d));
  return Tensor::matrix(end - begin, d, std::move(data));
}

Tensor row_vec(const Tensor& m, std::size_t r) {
  return Tensor::column(std::vector<double>(m.data().begin() + static_cast<std::ptrdiff_t>(r * m.cols()),
                                            m.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols())));
}

void set_row(Tensor& m, std::size_t r, const Tensor& v) {
  std::copy(v.data().begin(), v.data().end(), m.data().begin() + static_cast<std::ptrdiff_t>(r * m.cols()));
}

std::string provenance(const ExperimentConfig& cfg, const std::string& split) {
  json p;
  p["generator"] = "cgkoop gen";
  p["split"] = split;
  p["seed"] = cfg.seed;
  p["seed_derivation"] = "derive_seed(seed, tag, index); tags: ic-train, ic-test, noise-train, noise-test";
  p["solver"] = {{"scheme", "etdrk4"},
                 {"pde", pde::to_string(cfg.dataset.pde)},
                 {"n", cfg.dataset.grid.n},
                 {"length", cfg.dataset.grid.length},
                 {"dt", cfg.dataset.dt},
                 {"t_final", cfg.dataset.t_final},
                 {"nu", cfg.dataset.nu}};
  p["subsample"] = {{"every_t", cfg.dataset.record_every()}, {"every_x", cfg.dataset.stride_x()}};
  p["initial"] = cfg.dataset.initial;
  return p.dump();
}

pde::TrajectoryDataset truncated(pde::TrajectoryDataset ds, std::size_t max_steps) {
  if (max_steps == 0 || max_steps + 1 >= ds.length()) return ds;
  std::vector<Tensor> parts;
  for (std::size_t k = 0; k < ds.trajectories(); ++k) parts.push_back(rows_of(ds.trajectory(k), 0, max_steps + 1));
  ds.states = stack(parts);
  return ds;
}

}  // namespace

void write_resolved_config(const fs::path& dir, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  write_text(dir / "config.json", cfg.to_json() + "\n");
}

// ---- gen ------------------------------------------------------------------------

GeneratedData generate(const ExperimentConfig& cfg, std::size_t threads) {
  cfg.validate();
  const auto& dc = cfg.dataset;
  const pde::SolveConfig sc{dc.dt, dc.t_final, dc.record_every(), dc.nu};
  const pde::Subsample sub{1, dc.stride_x()};
  const auto observed = dc.observed();
  const pde::SpectralSolver solver(dc.pde, dc.grid, dc.dt, dc.nu);
  const std::size_t steps = sc.steps();

  GeneratedData out;
  if (dc.initial == "grf") {
    const auto split = [&](std::size_t count, const std::string& tag) {
      std::vector<Tensor> runs(count);
      num::parallel_for(count, threads, [&](std::size_t k) {
        RngStream rng(derive_seed(cfg.seed, "ic-" + tag, k));
        runs[k] = solver.solve(pde::sample_grf(dc.grid, rng, dc.grf), steps, sc.record_every);
      });
      RngStream noise(derive_seed(cfg.seed, "noise-" + tag));
      auto ds = pde::make_dataset(stack(runs), dc.grid, sc.dt * static_cast<double>(sc.record_every), sub, observed,
                                  dc.noise_std, noise);
      ds.provenance = provenance(cfg, tag);
      return ds;
    };
    out.train = split(dc.train_trajectories, "train");
    out.test = split(dc.test_trajectories, "test");
    return out;
  }

  // One long run from the literal initial condition, split in time.
  const Tensor run = solver.solve(pde::ks_preset_initial(dc.grid), steps, sc.record_every);
  const std::size_t rows = run.rows();
  const auto cut = static_cast<std::size_t>(std::floor(dc.train_fraction * static_cast<double>(rows - 1)));
  if (cut < 2 || rows - cut < 2) throw ConfigError("dataset.train_fraction leaves an empty split");
  const double row_dt = sc.dt * static_cast<double>(sc.record_every);
  RngStream noise_train(derive_seed(cfg.seed, "noise-train"));
  RngStream noise_test(derive_seed(cfg.seed, "noise-test"));
  out.train = pde::make_dataset(rows_of(run, 0, cut), dc.grid, row_dt, sub, observed, dc.noise_std, noise_train);
  out.test = pde::make_dataset(rows_of(run, cut, rows), dc.grid, row_dt, sub, observed, dc.noise_std, noise_test);
  out.train.provenance = provenance(cfg, "train");
  out.test.provenance = provenance(cfg, "test");
  return out;
}

GeneratedData cmd_gen(const ExperimentConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  const auto t0 = Clock::now();
  GeneratedData g = generate(cfg, ctx.threads);
  write_resolved_config(ctx.out, cfg);
  pde::write_dataset(ctx.out / "train", g.train);
  pde::write_dataset(ctx.out / "test", g.test);
  std::ostringstream os;
  os << "gen: " << pde::to_string(cfg.dataset.pde) << " train " << g.train.states.shape_string() << " test "
     << g.test.states.shape_string() << " d1=" << g.train.observed.size() << " in " << seconds_since(t0) << " s";
  say(ctx, os.str());
  return g;
}

// ---- train ------------------------------------------------------------------------

namespace {

void write_log(const fs::path& path, const std::vector<train::EpochLog>& log) {
  std::ofstream os(path);
  train::write_train_log(os, log);
}

model::StateSpec spec_for(const ExperimentConfig& cfg, const pde::TrajectoryDataset& ds) {
  model::StateSpec spec(ds.dim(), ds.observed, cfg.model.dv);
  spec.validate();
  return spec;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& data, const RunContext& ctx,
                       const std::optional<fs::path>& resume) {
  cfg.validate();
  const auto ds = pde::read_dataset(data / "train");
  const auto spec = spec_for(cfg, ds);
  if (cfg.train.n_l > ds.length() - 1) {
    throw ConfigError("train.n_l exceeds the number of steps per training trajectory (" +
                      std::to_string(ds.length() - 1) + ")");
  }
  const auto set = train::TrainingSet::from_states(spec, ds.states);

  train::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  tc.threads = ctx.threads;

  write_resolved_config(ctx.out, cfg);
  const fs::path ckdir = ctx.out / "checkpoints";
  fs::create_directories(ckdir);

  std::optional<model::Checkpoint> start;
  if (resume) {
    start = model::load_checkpoint(*resume);
    if (start->stage != 1) throw ConfigError("--resume expects a stage-1 checkpoint, got stage " + std::to_string(start->stage));
    if (start->params.spec.d != spec.d || start->params.spec.dv != spec.dv ||
        start->params.spec.observed != spec.observed) {
      throw ConfigError("--resume checkpoint does not match the dataset/model shape");
    }
  }

  RngStream init_rng(derive_seed(cfg.seed, "init"));
  auto init = model::CGKNParams::create(spec, cfg.model.shape, init_rng);

  train::TrainHooks hooks;
  std::size_t epochs_seen = 0;
  hooks.on_epoch = [&](int stage, const train::EpochLog& e, const model::CGKNParams& p) {
    ++epochs_seen;
    if (cfg.checkpoint_every > 0 && epochs_seen % cfg.checkpoint_every == 0) {
      model::save_checkpoint(ckdir / "latest", {p, std::nullopt, stage});
    }
    if (ctx.log && (e.epoch + 1) % 10 == 0) {
      std::ostringstream os;
      os << "train: stage " << stage << " epoch " << e.epoch + 1 << " loss " << e.total << " (" << e.wall_time_s << " s)";
      say(ctx, os.str());
    }
  };
  hooks.on_stage1_done = [&](const model::CGKNParams& p) { model::save_checkpoint(ckdir / "stage1", {p, std::nullopt, 1}); };

  const auto t0 = Clock::now();
  auto result = train::train_cgkn(std::move(init), set, tc, hooks, start ? &start->params : nullptr);
  write_log(ctx.out / "stage1_log.csv", result.stage1);
  write_log(ctx.out / "stage2_log.csv", result.stage2);

  train::UqConfig uc = cfg.uq;
  uc.seed = derive_seed(cfg.seed, "uq");
  const auto residuals = train::collect_residuals(result.params, set, cfg.train.n_b);
  model::Checkpoint ck{result.params, train::train_uq(residuals, uc), 2};
  model::save_checkpoint(ctx.out / "checkpoint", ck);

  std::ostringstream os;
  os << "train: " << result.params.parameter_count() << " parameters, stage1 " << result.stage1.size()
     << " epochs, stage2 " << result.stage2.size() << " epochs, " << seconds_since(t0) << " s";
  say(ctx, os.str());
  return {std::move(ck), std::move(result.stage1), std::move(result.stage2)};
}

// ---- eval -------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::Cgkn: return "cgkn";
    case Method::Enkf: return "enkf";
    case Method::Interp: return "interp";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "cgkn") return Method::Cgkn;
  if (s == "enkf") return Method::Enkf;
  if (s == "interp") return Method::Interp;
  throw ConfigError("--method must be one of cgkn, enkf, interp; got '" + s + "'");
}

namespace {

struct MethodRun {
  Tensor mean;  // [T × d]
  Tensor std;   // [T × d]
  double da_seconds = 0;
  std::optional<Tensor> forecast;  // [T−1 × d]
  std::optional<Tensor> rollout;   // [T × d]
};

MethodRun run_cgkn(const model::Checkpoint& ck, const Tensor& truth, const EvalConfig& ec) {
  const auto& p = ck.params;
  const auto& spec = p.spec;
  const std::size_t t = truth.rows(), d = truth.cols();
  const Tensor u1 = spec.observed_part(truth);
  const Mlp* uq = ck.uq ? &*ck.uq : nullptr;

  MethodRun r;
  const auto t0 = Clock::now();
  const auto init = filter::GaussianBelief::standard(spec.dv);
  const auto beliefs = filter::filter_run(p, u1, init, ec.warmup);
  const auto decoded = filter::decode_run(p, beliefs, uq, rows_of(u1, 1, t));
  const Tensor u1_0 = row_vec(u1, 0);
  const auto first = filter::decode_posterior(p, init, uq, &u1_0);
  r.da_seconds = seconds_since(t0);

  Tensor u2_mean = Tensor::matrix(t, spec.d2());
  Tensor u2_std = Tensor::matrix(t, spec.d2());
  set_row(u2_mean, 0, first.mu);
  if (first.std) set_row(u2_std, 0, *first.std);
  for (std::size_t n = 1; n < t; ++n) {
    set_row(u2_mean, n, row_vec(decoded.mu, n - 1));
    if (decoded.std) set_row(u2_std, n, row_vec(*decoded.std, n - 1));
  }
  r.mean = spec.merge(u1, u2_mean);
  r.std = spec.merge(Tensor::matrix(t, spec.d1()), u2_std);

  Tensor fc = Tensor::matrix(t - 1, d, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t n = 0; n + 1 < t; ++n) {
    try {
      set_row(fc, n, model::forecast(p, row_vec(truth, n), 1));
    } catch (const DivergenceError&) {
      // left as NaN
    }
  }
  r.forecast = std::move(fc);

  // Free rollout from the first state; rows past a divergence stay NaN.
  Tensor ro = Tensor::matrix(t, d, std::numeric_limits<double>::quiet_NaN());
  set_row(ro, 0, row_vec(truth, 0));
  std::size_t done = t - 1;
  while (done > 0) {
    try {
      const Tensor path = model::forecast(p, row_vec(truth, 0), done);
      for (std::size_t n = 0; n < done; ++n) set_row(ro, n + 1, row_vec(path, n));
      break;
    } catch (const DivergenceError& e) {
      // Keep the finite prefix.
      const std::size_t ok = e.step() > 1 ? e.step() - 1 : 0;
      if (ok >= done) break;
      done = ok;
    }
  }
  r.rollout = std::move(ro);
  return r;
}

// Periodic linear interpolation from d points onto n >= d points.
Tensor refine_linear(const Tensor& u, std::size_t n) {
  const std::size_t d = u.size();
  if (n == d) return u;
  Tensor out = Tensor::column(std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(d) / static_cast<double>(n);
    const auto j = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(j);
    out[i] = (1.0 - w) * u[j] + w * u[(j + 1) % d];
  }
  return out;
}

Tensor coarsen(const Tensor& u, std::size_t d) {
  const std::size_t stride = u.size() / d;
  Tensor out = Tensor::column(std::vector<double>(d));
  for (std::size_t j = 0; j < d; ++j) out[j] = u[j * stride];
  return out;
}

Tensor enkf_initial(const ExperimentConfig& cfg, const fs::path& data, std::size_t d, std::size_t trajectory) {
  const std::size_t j = cfg.enkf.members;
  Tensor ens = Tensor::matrix(j, d);
  RngStream rng(derive_seed(cfg.seed, "enkf-init", trajectory));
  if (cfg.dataset.initial == "grf") {
    // Same prior as the data's initial conditions, drawn on the solver grid.
    for (std::size_t m = 0; m < j; ++m) {
      set_row(ens, m, coarsen(pde::sample_grf(cfg.dataset.grid, rng, cfg.dataset.grf), d));
    }
    return ens;
  }
  const auto train = pde::read_dataset(data / "train");
  const std::size_t pool = train.trajectories() * train.length();
  for (std::size_t m = 0; m < j; ++m) {
    const std::size_t k = rng.below(pool);
    set_row(ens, m, row_vec(train.states.reshaped({pool, train.dim()}), k));
  }
  return ens;
}

MethodRun run_enkf(const ExperimentConfig& cfg, const fs::path& data, const Tensor& truth,
                   const std::vector<std::size_t>& observed, std::size_t trajectory, std::size_t threads) {
  const std::size_t d = truth.cols();
  const std::size_t nf = cfg.enkf.grid_n ? cfg.enkf.grid_n : d;
  const pde::GridSpec fine{cfg.dataset.grid.length, nf};
  const pde::SpectralSolver solver(cfg.dataset.pde, fine, cfg.enkf.dt, cfg.dataset.nu);
  const auto inner = static_cast<std::size_t>(std::llround(cfg.dataset.sample_dt / cfg.enkf.dt));
  const enkf::ForwardModel model = [&](const Tensor& x) {
    return coarsen(solver.advance(refine_linear(x, nf), inner), d);
  };

  enkf::EnKFConfig ec;
  ec.members = cfg.enkf.members;
  ec.inflation = cfg.enkf.inflation;
  ec.localization = cfg.enkf.localization;
  ec.observed = observed;
  ec.obs_std.assign(observed.size(), cfg.enkf.effective_obs_std(cfg.dataset));
  ec.seed = derive_seed(cfg.seed, "enkf", trajectory);
  ec.threads = threads;

  model::StateSpec split(d, observed, 1);
  const auto run = enkf::enkf_run(ec, split.observed_part(truth), enkf_initial(cfg, data, d, trajectory), model);
  return {run.mean, run.std, run.wall_time_s, std::nullopt, std::nullopt};
}

MethodRun run_interp(const Tensor& truth, const std::vector<std::size_t>& observed, const pde::GridSpec& grid) {
  model::StateSpec split(truth.cols(), observed, 1);
  MethodRun r;
  const auto t0 = Clock::now();
  r.mean = base::interpolate_series(split.observed_part(truth), observed, grid);
  r.da_seconds = seconds_since(t0);
  r.std = Tensor::matrix(truth.rows(), truth.cols());
  return r;
}

}  // namespace

EvalOutcome cmd_eval(const ExperimentConfig& cfg, Method method, const fs::path& data, const RunContext& ctx,
                     const std::optional<fs::path>& checkpoint) {
  cfg.validate();
  std::optional<model::Checkpoint> ck;
  if (method == Method::Cgkn) {
    if (!checkpoint) throw ConfigError("eval --method cgkn needs --checkpoint DIR (the 'checkpoint' directory written by train)");
    if (!fs::exists(*checkpoint / "manifest.json")) {
      throw ConfigError("no checkpoint at " + checkpoint->string() + "; run train first");
    }
    ck = model::load_checkpoint(*checkpoint);
  }
  const auto test = truncated(pde::read_dataset(data / "test"), cfg.eval.max_steps);
  if (ck && (ck->params.spec.d != test.dim() || ck->params.spec.observed != test.observed)) {
    throw ConfigError("checkpoint state layout does not match the test dataset");
  }
  const std::size_t s = test.trajectories();

  std::vector<MethodRun> runs(s);
  for (std::size_t k = 0; k < s; ++k) {
    const Tensor truth = test.trajectory(k);
    switch (method) {
      case Method::Cgkn: runs[k] = run_cgkn(*ck, truth, cfg.eval); break;
      case Method::Enkf: runs[k] = run_enkf(cfg, data, truth, test.observed, k, ctx.threads); break;
      case Method::Interp: runs[k] = run_interp(truth, test.observed, test.grid); break;
    }
  }

  std::vector<Tensor> means, stds, forecasts, rollouts;
  double seconds = 0;
  for (auto& r : runs) {
    means.push_back(std::move(r.mean));
    stds.push_back(std::move(r.std));
    if (r.forecast) forecasts.push_back(std::move(*r.forecast));
    if (r.rollout) rollouts.push_back(std::move(*r.rollout));
    seconds += r.da_seconds;
  }

  EvalOutcome out;
  out.posterior_mean = stack(means);
  out.posterior_std = stack(stds);
  base::EvalInputs in;
  in.method = to_string(method);
  in.truth = test.states;
  in.posterior_mean = out.posterior_mean;
  if (!forecasts.empty()) in.forecast = stack(forecasts);
  in.observed = test.observed;
  in.warmup = cfg.eval.warmup;
  in.wall_time_s = seconds;
  out.report = base::evaluate(in);

  write_resolved_config(ctx.out, cfg);
  num::write_cgt(ctx.out / "posterior_mean.cgt", out.posterior_mean);
  num::write_cgt(ctx.out / "posterior_std.cgt", out.posterior_std);
  num::write_cgt(ctx.out / "truth.cgt", test.states);
  if (in.forecast) num::write_cgt(ctx.out / "forecast.cgt", *in.forecast);
  if (!rollouts.empty()) num::write_cgt(ctx.out / "rollout.cgt", stack(rollouts));
  {
    std::ofstream os(ctx.out / "metrics.csv");
    base::write_metrics_csv(os, {out.report});
  }
  write_text(ctx.out / "metrics.json", out.report.to_json() + "\n");
  fs::copy_file(data / "test" / "manifest.json", ctx.out / "manifest.json", fs::copy_options::overwrite_existing);

  std::ostringstream os;
  os << "eval: " << in.method << " da_mse " << out.report.da_mse;
  if (out.report.forecast_mse) os << " forecast_mse " << *out.report.forecast_mse;
  os << " da_time " << seconds << " s over " << s << " trajectories";
  say(ctx, os.str());
  return out;
}

// ---- bench-filter ----------------------------------------------------------------

filter::ComplexityReport cmd_bench_filter(const std::vector<std::size_t>& ladder, std::size_t n_steps,
                                          const RunContext& ctx) {
  if (ladder.size() < 2) throw ConfigError("bench-filter needs at least two latent widths");
  if (n_steps == 0) throw ConfigError("bench-filter --steps must be >= 1");
  const auto rep = filter::filter_complexity_probe(ladder, n_steps);
  fs::create_directories(ctx.out);
  std::ostringstream csv;
  csv << "dv,seconds\n";
  csv.precision(17);
  for (const auto& r : rep.rows) csv << r.dv << ',' << r.seconds << '\n';
  write_text(ctx.out / "bench_filter.csv", csv.str());
  json j{{"n_steps", n_steps}, {"slope", rep.slope}, {"ladder", ladder}};
  write_text(ctx.out / "bench_filter.json", j.dump(2) + "\n");
  std::ostringstream os;
  os << "bench-filter: log-log slope " << rep.slope;
  say(ctx, os.str());
  return rep;
}

// ---- report -----------------------------------------------------------------------

std::string cmd_report(const std::vector<fs::path>& runs, const RunContext& ctx) {
  if (runs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<base::LabelledReport> rows;
  for (const auto& dir : runs) {
    if (!fs::exists(dir / "metrics.csv")) throw ConfigError("no metrics.csv in " + dir.string());
    std::string label = dir.filename().string();
    if (fs::exists(dir / "config.json")) {
      const auto c = json::parse(read_text(dir / "config.json"));
      if (c.contains("name")) label = c.at("name").get<std::string>();
    }
    std::ifstream in(dir / "metrics.csv");
    for (auto& m : base::read_metrics_csv(in)) rows.push_back({label, std::move(m)});
  }
  const std::string table = base::format_table(rows);
  fs::create_directories(ctx.out);
  write_text(ctx.out / "report.md", table);
  std::ostringstream csv;
  csv << "experiment," << base::MetricReport::csv_header() << '\n';
  for (const auto& r : rows) csv << r.experiment << ',' << r.report.csv_row() << '\n';
  write_text(ctx.out / "report.csv", csv.str());
  say(ctx, table);
  return table;
}

}  // namespace cgkoop::app
