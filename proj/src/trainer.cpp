#include "esmeta/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "esmeta/errors.hpp"

namespace esmeta {

namespace {

constexpr std::uint64_t kInitTag = 0x494E4954;       // "INIT"
constexpr std::uint64_t kIterationTag = 0x49544552;  // "ITER"
constexpr std::uint64_t kTaskTag = 0x5441534B;       // "TASK"
constexpr std::uint64_t kRolloutTag = 0x524F4C4C;    // "ROLL"

}  // namespace

void MetaConfig::validate() const {
  if (workers == 0) throw ConfigError("M", "must be >= 1");
  if (k == 0) throw ConfigError("K", "must be >= 1");
  if (tasks_per_iteration == 0) throw ConfigError("tasks_per_iteration", "must be >= 1");
  if (trajectories_per_actor == 0) throw ConfigError("trajectories_per_actor", "must be >= 1");
  if (horizon == 0) throw ConfigError("horizon", "must be >= 1");
  if (hidden == 0) throw ConfigError("hidden", "must be >= 1");
  if (lr_mu_actor < 0) throw ConfigError("lr_mu_actor", "must be >= 0");
  if (lr_sigma_actor < 0) throw ConfigError("lr_sigma_actor", "must be >= 0");
  if (lr_mu_critic < 0) throw ConfigError("lr_mu_critic", "must be >= 0");
  if (lr_sigma_critic < 0) throw ConfigError("lr_sigma_critic", "must be >= 0");
  if (!(sigma_bounds.min > 0.0) || sigma_bounds.max < sigma_bounds.min) {
    throw ConfigError("sigma_min", "need 0 < sigma_min <= sigma_max");
  }
  if (!(sigma_init >= sigma_bounds.min && sigma_init <= sigma_bounds.max)) {
    throw ConfigError("sigma_init", "must lie in [sigma_min, sigma_max]");
  }
  if (trajectories_per_actor * horizon * k < adapt.batch_size) {
    throw ConfigError("batch_size", "exceeds the transitions collected per task");
  }
  try {
    adapt.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("adapt", e.what());
  }
}

MetaSnapshot initial_distributions(const MetaConfig& cfg) {
  auto actor_layout = std::make_shared<const nn::NetLayout>(
      nn::build_actor_layout(kObsDim, kActionDim, cfg.hidden));
  auto critic_layout = std::make_shared<const nn::NetLayout>(
      nn::build_critic_layout(kObsDim, kActionDim, cfg.hidden));
  Rng rng(derive_seed({kInitTag, cfg.master_seed}));
  nn::FlatParams mu_actor = nn::xavier_init(actor_layout, rng);
  nn::FlatParams mu_critic = nn::xavier_init(critic_layout, rng);
  return {GaussianParamDist(std::move(mu_actor), cfg.sigma_init, cfg.sigma_bounds),
          GaussianParamDist(std::move(mu_critic), cfg.sigma_init, cfg.sigma_bounds)};
}

std::uint64_t iteration_seed(std::uint64_t master_seed, std::size_t iteration) {
  return derive_seed({kIterationTag, master_seed, iteration});
}

std::vector<PerturbationSeed> actor_seeds(std::uint64_t iter_seed, std::uint32_t worker_index,
                                          std::size_t k) {
  std::vector<PerturbationSeed> seeds;
  seeds.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    seeds.push_back({worker_index, static_cast<std::uint32_t>(j), iter_seed});
  }
  return seeds;
}

PerturbationSeed critic_seed(std::uint64_t iter_seed, std::uint32_t worker_index) {
  return {worker_index, kCriticMember, iter_seed};
}

std::vector<Task> sample_tasks(const PointEnv& env, const MetaConfig& cfg,
                               std::uint64_t iter_seed) {
  Rng rng(derive_seed({kTaskTag, iter_seed}));
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < cfg.tasks_per_iteration; ++t) {
    Task task = env.sample_task(cfg.family, rng);
    if (cfg.fixed_goal) task.goal = *cfg.fixed_goal;
    tasks.push_back(task);
  }
  return tasks;
}

double actor_fitness(const PointEnv& env, const nn::FlatParams& adapted_actor, const Task& task,
                     std::size_t horizon, Rng& rng) {
  return env.rollout(adapted_actor, task, horizon, rng).episode_return;
}

double actor_fitness(const PointEnv& env, const nn::FlatParams& adapted_actor,
                     std::span<const Task> tasks, std::size_t horizon, Rng& rng) {
  if (tasks.empty()) throw InvalidArgument("actor_fitness needs at least one task");
  double sum = 0.0;
  for (const Task& task : tasks) sum += actor_fitness(env, adapted_actor, task, horizon, rng);
  return sum / static_cast<double>(tasks.size());
}

double critic_fitness(const nn::FlatParams& adapted_critic, const Trajectory& trajectory,
                      double gamma) {
  if (trajectory.transitions.empty()) throw InvalidArgument("critic_fitness needs a trajectory");
  const std::vector<double> rewards = trajectory.rewards();
  const std::vector<double> returns = monte_carlo_returns(rewards, gamma);
  double sse = 0.0;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const Transition& tr = trajectory.transitions[t];
    const double err = nn::critic_forward(adapted_critic, tr.obs, tr.action) - returns[t];
    sse += err * err;
  }
  return -sse / static_cast<double>(returns.size());
}

TaskOutcome run_task(const PointEnv& env, const KSamples& actors, const nn::FlatParams& critic,
                     const Task& task, const MetaConfig& cfg, std::uint64_t rng_key,
                     TaskRunOptions options) {
  Rng rng(rng_key);
  // With both inner learning rates at zero adaptation is the identity, so
  // the exploration rollouts would be discarded unused.
  const bool identity = options.skip_adaptation ||
                        (cfg.adapt.critic_lr == 0.0 && cfg.adapt.actor_lr == 0.0);
  TaskOutcome out{0.0, 0.0, 0.0, AdaptedPair{actors.mean, critic}};
  if (!identity) {
    const ReplayBuffer buffer = collect_exploration_rollouts(
        env, task, actors.samples, cfg.trajectories_per_actor, cfg.horizon, rng);
    out.adapted = adapt(actors.mean, critic, buffer, cfg.adapt, rng);
  }
  if (options.measure_pre_return) {
    out.pre_return = actor_fitness(env, actors.mean, task, cfg.horizon, rng);
  }
  const Trajectory test = env.rollout(out.adapted.actor, task, cfg.horizon, rng);
  out.post_return = test.episode_return;
  out.critic_fitness = critic_fitness(out.adapted.critic, test, cfg.adapt.gamma);
  return out;
}

WorkerResult evaluate_worker(const MetaSnapshot& snapshot, std::span<const Task> tasks,
                             std::uint32_t worker_index, std::uint64_t iter_seed,
                             const MetaConfig& cfg) {
  if (tasks.empty()) throw InvalidArgument("evaluate_worker needs at least one task");
  WorkerResult result;
  result.worker_index = worker_index;
  result.actor_seeds = actor_seeds(iter_seed, worker_index, cfg.k);
  result.critic_seed = critic_seed(iter_seed, worker_index);
  try {
    const PointEnv env(cfg.env);
    const KSamples actors = sample_k_and_mean(snapshot.actor, result.actor_seeds);
    const nn::FlatParams critic = sample(snapshot.critic, result.critic_seed);
    double actor_sum = 0.0;
    double critic_sum = 0.0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const TaskOutcome outcome = run_task(env, actors, critic, tasks[t], cfg,
                                           derive_seed({kRolloutTag, iter_seed, worker_index, t}));
      actor_sum += outcome.post_return;
      critic_sum += outcome.critic_fitness;
    }
    result.actor_fitness = actor_sum / static_cast<double>(tasks.size());
    result.critic_fitness = critic_sum / static_cast<double>(tasks.size());
    if (!std::isfinite(result.actor_fitness) || !std::isfinite(result.critic_fitness)) {
      throw NumericFailure("non-finite fitness");
    }
  } catch (const NumericFailure& e) {
    result.error = e.what();
  }
  return result;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t count = std::min(std::max<std::size_t>(threads, 1), n);
  if (count <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

MetaSnapshot update_distributions(const MetaSnapshot& current, const MetaConfig& cfg,
                                  std::span<const WorkerResult> results) {
  std::vector<const WorkerResult*> ok;
  for (const WorkerResult& w : results) {
    if (!w.error) ok.push_back(&w);
  }
  if (ok.empty()) throw NumericFailure("no worker results to aggregate");

  std::vector<double> raw_actor;
  std::vector<double> raw_critic;
  for (const WorkerResult* w : ok) {
    raw_actor.push_back(w->actor_fitness);
    raw_critic.push_back(w->critic_fitness);
  }
  const std::vector<double> shaped_actor = shape_fitness(raw_actor, cfg.actor_shaping);
  const std::vector<double> shaped_critic = shape_fitness(raw_critic, cfg.critic_shaping);

  // Regenerate each worker's samples from its seeds and form its gradient
  // contribution; merge in result order.
  std::vector<NesAccumulator> actor_parts(ok.size(), NesAccumulator(current.actor));
  std::vector<NesAccumulator> critic_parts(ok.size(), NesAccumulator(current.critic));
  parallel_for(ok.size(), cfg.threads, [&](std::size_t n) {
    const WorkerResult& w = *ok[n];
    std::vector<nn::FlatParams> samples;
    samples.reserve(w.actor_seeds.size());
    for (const PerturbationSeed& seed : w.actor_seeds) samples.push_back(sample(current.actor, seed));
    actor_parts[n].add(samples, shaped_actor[n]);
    critic_parts[n].add(sample(current.critic, w.critic_seed), shaped_critic[n]);
  });
  NesAccumulator actor_acc(current.actor);
  NesAccumulator critic_acc(current.critic);
  for (std::size_t n = 0; n < ok.size(); ++n) {
    actor_acc.merge(actor_parts[n]);
    critic_acc.merge(critic_parts[n]);
  }
  return {sgd_step(current.actor, actor_acc.finish(), cfg.lr_mu_actor, cfg.lr_sigma_actor),
          sgd_step(current.critic, critic_acc.finish(), cfg.lr_mu_critic, cfg.lr_sigma_critic)};
}

IterationOutput meta_iteration(const MetaSnapshot& current, const MetaConfig& cfg,
                               std::size_t iteration_index) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t iter_seed = iteration_seed(cfg.master_seed, iteration_index);
  const PointEnv env(cfg.env);
  const std::vector<Task> tasks = sample_tasks(env, cfg, iter_seed);

  std::vector<WorkerResult> results(cfg.workers);
  parallel_for(cfg.workers, cfg.threads, [&](std::size_t i) {
    try {
      results[i] = evaluate_worker(current, tasks, static_cast<std::uint32_t>(i), iter_seed, cfg);
    } catch (const std::exception& e) {
      results[i].worker_index = static_cast<std::uint32_t>(i);
      results[i].error = e.what();
    }
  });

  std::vector<double> raw_actor;
  for (const WorkerResult& w : results) {
    if (!w.error) raw_actor.push_back(w.actor_fitness);
  }
  if (raw_actor.empty()) throw NumericFailure("all workers failed: " + *results.front().error);

  IterationOutput out{update_distributions(current, cfg, results), {}, std::move(results)};

  IterationStats& s = out.stats;
  s.iteration = iteration_index;
  const double m = static_cast<double>(raw_actor.size());
  s.fitness_mean = std::accumulate(raw_actor.begin(), raw_actor.end(), 0.0) / m;
  s.fitness_max = *std::max_element(raw_actor.begin(), raw_actor.end());
  s.fitness_min = *std::min_element(raw_actor.begin(), raw_actor.end());
  double var = 0.0;
  for (double f : raw_actor) var += (f - s.fitness_mean) * (f - s.fitness_mean);
  s.fitness_std = std::sqrt(var / m);
  s.sigma_mean_actor = out.next.actor.sigma_mean();
  s.sigma_mean_critic = out.next.critic.sigma_mean();
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

TrainResult train(const MetaConfig& cfg, const TrainHooks& hooks,
                  std::optional<MetaSnapshot> start, std::size_t first_iteration) {
  cfg.validate();
  TrainResult result{start ? std::move(*start) : initial_distributions(cfg), {}, 0};
  std::size_t consecutive_failures = 0;
  for (std::size_t it = first_iteration; it < first_iteration + cfg.iterations; ++it) {
    try {
      IterationOutput out = meta_iteration(result.final_dists, cfg, it);
      for (const WorkerResult& w : out.workers) {
        if (w.error && hooks.on_warning) {
          hooks.on_warning(it, "worker " + std::to_string(w.worker_index) + " dropped: " + *w.error);
        }
      }
      result.final_dists = std::move(out.next);
      result.stats.push_back(out.stats);
      consecutive_failures = 0;
      if (hooks.on_iteration) hooks.on_iteration(result.final_dists, out.stats);
    } catch (const NumericFailure& e) {
      ++result.failed_iterations;
      if (hooks.on_warning) hooks.on_warning(it, std::string("iteration failed: ") + e.what());
      if (++consecutive_failures >= 3) throw;
    }
  }
  return result;
}

}  // namespace esmeta
