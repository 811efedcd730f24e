#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cgkoop/app/config.hpp"
#include "cgkoop/app/experiment.hpp"
#include "cgkoop/errors.hpp"
#include "cgkoop/numcore/parallel.hpp"

namespace fs = std::filesystem;
using namespace cgkoop;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = num::default_threads();
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (.toml or .json)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "top-level seed; overrides the config");
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

app::ExperimentConfig resolve(const Common& c) {
  auto cfg = app::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Conditional Gaussian Koopman network experiments"};
  cli.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts, bench_opts, report_opts;
  std::string train_data, eval_data, resume, checkpoint, method = "cgkn";
  std::vector<std::size_t> ladder{8, 16, 32, 64};
  std::size_t bench_steps = 1000;
  std::vector<std::string> runs;

  auto* gen = cli.add_subcommand("gen", "simulate the PDE and write train/test datasets");
  add_common(gen, gen_opts, true);

  auto* tr = cli.add_subcommand("train", "two-stage CGKN training plus the UQ network");
  add_common(tr, train_opts, true);
  tr->add_option("--dataset", train_data, "directory written by gen")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--resume", resume, "stage-1 checkpoint; skips stage 1")->check(CLI::ExistingDirectory);

  auto* ev = cli.add_subcommand("eval", "run a DA method on the test split");
  add_common(ev, eval_opts, true);
  ev->add_option("--dataset", eval_data, "directory written by gen")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--method", method, "cgkn, enkf or interp");
  ev->add_option("--checkpoint", checkpoint, "checkpoint directory (cgkn only)");

  auto* bench = cli.add_subcommand("bench-filter", "time the CG filter against the latent width");
  add_common(bench, bench_opts, false);
  bench->add_option("--dv", ladder, "latent widths")->expected(2, 64);
  bench->add_option("--steps", bench_steps, "filter steps per timing");

  auto* rep = cli.add_subcommand("report", "aggregate metrics.csv files into one table");
  add_common(rep, report_opts, false);
  rep->add_option("--runs", runs, "eval output directories")->required()->expected(1, 1000);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      app::cmd_gen(resolve(gen_opts), {gen_opts.out, gen_opts.threads, &std::cout});
    } else if (*tr) {
      std::optional<fs::path> r;
      if (!resume.empty()) r = resume;
      app::cmd_train(resolve(train_opts), train_data, {train_opts.out, train_opts.threads, &std::cout}, r);
    } else if (*ev) {
      const auto m = app::parse_method(method);
      std::optional<fs::path> ck;
      if (!checkpoint.empty()) ck = checkpoint;
      app::cmd_eval(resolve(eval_opts), m, eval_data, {eval_opts.out, eval_opts.threads, &std::cout}, ck);
    } else if (*bench) {
      app::cmd_bench_filter(ladder, bench_steps, {bench_opts.out, bench_opts.threads, &std::cout});
    } else if (*rep) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      app::cmd_report(dirs, {report_opts.out, report_opts.threads, &std::cout});
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence at step " << e.step() << ": " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
