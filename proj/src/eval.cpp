#include <fstream>

#include "esmeta/experiment.hpp"

namespace esmeta {

namespace {
constexpr std::uint64_t kEvalTag = 0x4556414C;  // "EVAL"
}

EvalReport run_eval(const MetaSnapshot& snapshot, const MetaConfig& cfg, std::size_t eval_tasks,
                    std::size_t adapt_steps, std::uint64_t seed) {
  if (eval_tasks == 0) throw InvalidArgument("eval_tasks must be >= 1");
  MetaConfig run_cfg = cfg;
  run_cfg.adapt.grad_steps_per_adapt = std::max<std::size_t>(adapt_steps, 1);
  const PointEnv env(cfg.env);

  Rng task_rng(derive_seed({kEvalTag, seed}));
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < eval_tasks; ++i) {
    Task t = env.sample_task(cfg.family, task_rng);
    if (cfg.fixed_goal) t.goal = *cfg.fixed_goal;
    tasks.push_back(t);
  }

  EvalReport report;
  report.rows.resize(eval_tasks);
  parallel_for(eval_tasks, cfg.threads, [&](std::size_t i) {
    const std::uint64_t task_seed = derive_seed({kEvalTag, seed, i});
    const auto worker = static_cast<std::uint32_t>(i);
    const std::vector<PerturbationSeed> seeds = actor_seeds(task_seed, worker, cfg.k);
    const KSamples actors = sample_k_and_mean(snapshot.actor, seeds);
    const nn::FlatParams critic = sample(snapshot.critic, critic_seed(task_seed, worker));
    TaskRunOptions options;
    options.measure_pre_return = true;
    options.skip_adaptation = adapt_steps == 0;
    const TaskOutcome o =
        run_task(env, actors, critic, tasks[i], run_cfg, derive_seed({kEvalTag, task_seed}), options);
    report.rows[i] = {i, tasks[i], o.pre_return, o.post_return};
  });
  for (const EvalRow& row : report.rows) {
    report.mean_pre += row.pre_return;
    report.mean_post += row.post_return;
  }
  report.mean_pre /= static_cast<double>(eval_tasks);
  report.mean_post /= static_cast<double>(eval_tasks);
  return report;
}

std::string format_eval_csv(const EvalReport& report) {
  std::string out = "task,family,goal_x,goal_y,pre_return,post_return\n";
  for (const EvalRow& r : report.rows) {
    out += std::to_string(r.task_index) + ',' + std::string(task_family_name(r.task.family)) + ',' +
           format_double(r.task.goal[0]) + ',' + format_double(r.task.goal[1]) + ',' +
           format_double(r.pre_return) + ',' + format_double(r.post_return) + '\n';
  }
  return out;
}

std::string format_eval_summary(const EvalReport& report) {
  std::size_t improved = 0;
  for (const EvalRow& r : report.rows) improved += r.post_return > r.pre_return ? 1 : 0;
  return "tasks,mean_pre_return,mean_post_return,improved_tasks\n" +
         std::to_string(report.rows.size()) + ',' + format_double(report.mean_pre) + ',' +
         format_double(report.mean_post) + ',' + std::to_string(improved) + '\n';
}

}  // namespace esmeta
