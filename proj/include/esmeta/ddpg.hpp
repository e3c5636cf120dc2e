#ifndef ESMETA_DDPG_HPP_
#define ESMETA_DDPG_HPP_

// Inner adaptation loop: exploration rollouts with parameter-perturbed
// actors, a replay buffer, and deterministic-policy-gradient updates.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "esmeta/envs.hpp"
#include "esmeta/nn.hpp"
#include "esmeta/rng.hpp"
#include "esmeta/transition.hpp"

namespace esmeta {

// FIFO replay memory; the oldest transition is evicted when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  void append(const std::vector<Transition>& ts);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

  bool operator==(const ReplayBuffer& other) const { return data_ == other.data_; }

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
};

struct AdaptConfig {
  double gamma = 0.99;
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t grad_steps_per_adapt = 1;
  bool use_target_nets = false;
  double tau = 0.01;

  // Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct TargetNets {
  nn::FlatParams actor;
  nn::FlatParams critic;
};

// Every actor drives whole episodes; the perturbation stays fixed for the
// episode. Capacity is sized to hold all collected transitions.
ReplayBuffer collect_exploration_rollouts(const PointEnv& env, const Task& task,
                                          std::span<const nn::FlatParams> actors,
                                          std::size_t trajectories_per_actor,
                                          std::size_t horizon, Rng& rng);

// One SGD step on the batch-mean squared TD error, target
// y = r + gamma * (1 - done) * Q_target(s', mu_target(s')). Without `targets`
// the current critic and `actor` provide the bootstrap.
nn::FlatParams critic_update(const nn::FlatParams& critic, const ReplayBuffer& buffer,
                             const nn::FlatParams& actor, const AdaptConfig& cfg, Rng& rng,
                             const TargetNets* targets = nullptr);

// One ascent step on the batch mean of Q(s, actor(s)).
nn::FlatParams actor_update(const nn::FlatParams& actor, const nn::FlatParams& critic,
                            const ReplayBuffer& buffer, const AdaptConfig& cfg, Rng& rng);

struct AdaptedPair {
  nn::FlatParams actor;
  nn::FlatParams critic;
};

// grad_steps_per_adapt rounds of (critic_update, actor_update) on the same buffer.
AdaptedPair adapt(const nn::FlatParams& init_actor, const nn::FlatParams& init_critic,
                  const ReplayBuffer& buffer, const AdaptConfig& cfg, Rng& rng);

// Discounted returns-to-go: G_t = r_t + gamma * G_{t+1}.
std::vector<double> monte_carlo_returns(std::span<const double> rewards, double gamma);

// Batch-mean squared TD error (bootstrapping from critic/actor).
double td_loss(const nn::FlatParams& critic, const nn::FlatParams& actor,
               std::span<const Transition* const> batch, double gamma);

// Standalone DDPG on one fixed task with parameter-space exploration noise
// (a fresh Gaussian perturbation of the actor per episode).
struct DdpgTrainConfig {
  AdaptConfig adapt{.gamma = 0.9, .critic_lr = 3e-3, .actor_lr = 1e-3, .batch_size = 64,
                    .grad_steps_per_adapt = 1, .use_target_nets = true, .tau = 0.01};
  std::size_t hidden = 32;
  std::size_t episodes = 200;
  std::size_t horizon = 200;
  std::size_t updates_per_step = 1;
  std::size_t warmup_transitions = 1000;
  std::size_t buffer_capacity = 100000;
  double param_noise_std = 0.05;
};

struct DdpgTrainResult {
  nn::FlatParams actor;
  nn::FlatParams critic;
  std::vector<double> eval_returns;  // noise-free return after each episode
};

DdpgTrainResult train_ddpg(const PointEnv& env, const Task& task, const DdpgTrainConfig& cfg,
                           std::uint64_t seed);

}  // namespace esmeta

#endif  // ESMETA_DDPG_HPP_
