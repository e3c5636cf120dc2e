#ifndef ESMETA_TRAINER_HPP_
#define ESMETA_TRAINER_HPP_

// Outer meta-training loop. Each iteration publishes an immutable snapshot
// of the actor and critic distributions, evaluates M independent workers
// (sample K actors + 1 critic, explore, adapt, score), and applies the
// search-gradient update. Results depend only on (config, master_seed):
// workers are keyed by index and aggregated in index order.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esmeta/ddpg.hpp"
#include "esmeta/envs.hpp"
#include "esmeta/param_dist.hpp"

namespace esmeta {

struct MetaConfig {
  std::size_t workers = 16;  // M
  std::size_t k = 20;        // exploration actors per worker
  std::size_t tasks_per_iteration = 1;
  std::size_t trajectories_per_actor = 1;
  std::size_t horizon = 200;
  std::size_t hidden = 100;
  double lr_mu_actor = 5e-4;
  double lr_sigma_actor = 1e-5;
  double lr_mu_critic = 5e-4;
  double lr_sigma_critic = 1e-5;
  FitnessShaping actor_shaping = FitnessShaping::kCenteredRank;
  FitnessShaping critic_shaping = FitnessShaping::kNone;
  AdaptConfig adapt{};
  std::uint64_t master_seed = 0;
  std::size_t iterations = 100;
  double sigma_init = 0.05;
  SigmaBounds sigma_bounds{};
  TaskFamily family = TaskFamily::kGoalVelocity;
  EnvParams env{};
  // When set, every sampled task uses this goal (single-task runs).
  std::optional<Vec2> fixed_goal;
  // Worker concurrency. Never changes results.
  std::size_t threads = 1;

  void validate() const;
};

struct MetaSnapshot {
  GaussianParamDist actor;
  GaussianParamDist critic;
};

// Xavier-initialized means with sigma_init everywhere, keyed by master_seed.
MetaSnapshot initial_distributions(const MetaConfig& cfg);

inline constexpr std::uint32_t kCriticMember = 0xFFFFFFFFu;

// Seed shared by every worker in one iteration.
std::uint64_t iteration_seed(std::uint64_t master_seed, std::size_t iteration);
std::vector<PerturbationSeed> actor_seeds(std::uint64_t iter_seed, std::uint32_t worker_index,
                                          std::size_t k);
PerturbationSeed critic_seed(std::uint64_t iter_seed, std::uint32_t worker_index);
// The shared task mini-batch of one iteration.
std::vector<Task> sample_tasks(const PointEnv& env, const MetaConfig& cfg,
                               std::uint64_t iter_seed);

struct WorkerResult {
  std::uint32_t worker_index = 0;
  std::vector<PerturbationSeed> actor_seeds;
  PerturbationSeed critic_seed;
  double actor_fitness = 0.0;
  double critic_fitness = 0.0;
  // Set when the worker failed (e.g. numeric failure during adaptation).
  std::optional<std::string> error;

  bool operator==(const WorkerResult&) const = default;
};

struct IterationStats {
  std::size_t iteration = 0;
  double fitness_mean = 0.0;
  double fitness_max = 0.0;
  double fitness_min = 0.0;
  double fitness_std = 0.0;
  double sigma_mean_actor = 0.0;
  double sigma_mean_critic = 0.0;
  double wall_seconds = 0.0;

  bool operator==(const IterationStats&) const = default;
};

double actor_fitness(const PointEnv& env, const nn::FlatParams& adapted_actor, const Task& task,
                     std::size_t horizon, Rng& rng);
// Mean episode return over the tasks.
double actor_fitness(const PointEnv& env, const nn::FlatParams& adapted_actor,
                     std::span<const Task> tasks, std::size_t horizon, Rng& rng);
// -(1/T) sum_t (Q(s_t, a_t) - G_t)^2 against discounted returns of the trajectory.
double critic_fitness(const nn::FlatParams& adapted_critic, const Trajectory& trajectory,
                      double gamma);

// One worker's inner loop on one task, starting from already sampled params.
struct TaskOutcome {
  double pre_return = 0.0;   // mean-of-K actor before adaptation
  double post_return = 0.0;  // adapted actor
  double critic_fitness = 0.0;
  AdaptedPair adapted;
};

struct TaskRunOptions {
  // Also roll out the unadapted mean actor (evaluation only).
  bool measure_pre_return = false;
  // Score the unadapted mean actor and sampled critic as "adapted".
  bool skip_adaptation = false;
};

TaskOutcome run_task(const PointEnv& env, const KSamples& actors, const nn::FlatParams& critic,
                     const Task& task, const MetaConfig& cfg, std::uint64_t rng_key,
                     TaskRunOptions options = {});

WorkerResult evaluate_worker(const MetaSnapshot& snapshot, std::span<const Task> tasks,
                             std::uint32_t worker_index, std::uint64_t iter_seed,
                             const MetaConfig& cfg);

// Shapes the fitness of the non-failed results, regenerates their samples
// from the seeds and applies the four SGD updates. Throws NumericFailure
// when no result is usable.
MetaSnapshot update_distributions(const MetaSnapshot& current, const MetaConfig& cfg,
                                  std::span<const WorkerResult> results);

struct IterationOutput {
  MetaSnapshot next;
  IterationStats stats;
  std::vector<WorkerResult> workers;
};

// Throws NumericFailure when every worker failed; the input snapshot is
// left untouched in that case.
IterationOutput meta_iteration(const MetaSnapshot& current, const MetaConfig& cfg,
                               std::size_t iteration_index);

struct TrainResult {
  MetaSnapshot final_dists;
  std::vector<IterationStats> stats;
  std::size_t failed_iterations = 0;
};

struct TrainHooks {
  // Called after every completed iteration with the updated distributions.
  std::function<void(const MetaSnapshot&, const IterationStats&)> on_iteration;
  std::function<void(std::size_t iteration, const std::string& message)> on_warning;
};

// Runs cfg.iterations iterations starting from `start` (or the initial
// distributions) at index `first_iteration`. A failed iteration is skipped;
// three consecutive failures abort with the last error.
TrainResult train(const MetaConfig& cfg, const TrainHooks& hooks = {},
                  std::optional<MetaSnapshot> start = std::nullopt,
                  std::size_t first_iteration = 0);

// Runs fn(0..n-1) on up to `threads` threads. fn must not throw.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace esmeta

#endif  // ESMETA_TRAINER_HPP_
