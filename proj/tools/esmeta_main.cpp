// esmeta: train / eval / inspect front end.
//
//   esmeta train --config run.cfg [--set key=value ...]
//   esmeta eval --checkpoint run/checkpoint.bin --tasks 25 --adapt-steps 1 --seed 7
//   esmeta inspect --checkpoint run/checkpoint.bin
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "esmeta/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct SigmaSummary {
  double min, mean, max;
};

SigmaSummary summarize(const std::vector<double>& v) {
  return {*std::min_element(v.begin(), v.end()),
          std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()),
          *std::max_element(v.begin(), v.end())};
}

int run_inspect(const std::string& path) {
  const esmeta::Checkpoint c = esmeta::load_checkpoint(path);
  const SigmaSummary sa = summarize(c.sigma_a);
  const SigmaSummary sc = summarize(c.sigma_c);
  std::cout << "format_version " << c.format_version << "\n"
            << "obs_dim " << c.obs_dim << "\n"
            << "action_dim " << c.action_dim << "\n"
            << "hidden " << c.hidden << "\n"
            << "actor_params " << c.mu_a.size() << "\n"
            << "critic_params " << c.mu_c.size() << "\n"
            << "iteration " << c.iteration << "\n"
            << "master_seed " << c.master_seed << "\n"
            << "sigma_actor min/mean/max " << esmeta::format_double(sa.min) << " "
            << esmeta::format_double(sa.mean) << " " << esmeta::format_double(sa.max) << "\n"
            << "sigma_critic min/mean/max " << esmeta::format_double(sc.min) << " "
            << esmeta::format_double(sc.mean) << " " << esmeta::format_double(sc.max) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-RL with evolved exploration-parameter distributions"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "run meta-training");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--set", overrides, "override key=value (repeatable)");

  std::string ckpt_path;
  std::size_t tasks = 25;
  std::size_t adapt_steps = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> eval_out;
  auto* eval = app.add_subcommand("eval", "pre/post-adaptation returns on held-out tasks");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--tasks", tasks, "number of held-out tasks");
  eval->add_option("--adapt-steps", adapt_steps, "adaptation rounds (0 = none)");
  eval->add_option("--seed", seed, "task/perturbation seed");
  eval->add_option("--config", config_path, "config supplying task family and adaptation settings");
  eval->add_option("--set", overrides, "override key=value (repeatable)");
  eval->add_option("--out", eval_out, "write the per-task CSV here instead of stdout");

  auto* inspect = app.add_subcommand("inspect", "print checkpoint dimensions and sigma statistics");
  inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      esmeta::RunConfig cfg = esmeta::parse_config(config_path, overrides);
      cfg.meta.threads = esmeta::threads_from_env();
      const esmeta::RunOutputs out =
          esmeta::run_train(cfg, [](const std::string& line) { std::cerr << line << "\n"; });
      std::cout << "checkpoint " << out.checkpoint.string() << "\n"
                << "metrics " << out.metrics.string() << "\n";
      return 0;
    }
    if (*eval) {
      esmeta::RunConfig cfg = esmeta::parse_config(config_path, overrides);
      cfg.meta.threads = esmeta::threads_from_env();
      const esmeta::Checkpoint ckpt = esmeta::load_checkpoint(ckpt_path);
      if (ckpt.hidden != cfg.meta.hidden) cfg.meta.hidden = ckpt.hidden;
      const esmeta::EvalReport report = esmeta::run_eval(
          esmeta::snapshot_from_checkpoint(ckpt, cfg.meta.sigma_bounds), cfg.meta, tasks,
          adapt_steps, seed);
      const std::string csv = esmeta::format_eval_csv(report);
      if (eval_out) {
        std::ofstream f(*eval_out, std::ios::binary | std::ios::trunc);
        if (!f) throw esmeta::IoError("cannot write " + *eval_out);
        f << csv;
      } else {
        std::cout << csv;
      }
      std::cerr << esmeta::format_eval_summary(report);
      return 0;
    }
    if (*inspect) return run_inspect(ckpt_path);
  } catch (const esmeta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
