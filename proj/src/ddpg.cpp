#include "esmeta/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esmeta/errors.hpp"

namespace esmeta {

namespace {

void require_batch(const ReplayBuffer& buffer, const AdaptConfig& cfg) {
  if (buffer.size() < cfg.batch_size) {
    throw InvalidState("replay buffer holds " + std::to_string(buffer.size()) +
                       " transitions, batch needs " + std::to_string(cfg.batch_size));
  }
}

void require_finite(std::span<const double> v, const char* what) {
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
    throw NumericFailure(std::string("non-finite ") + what);
  }
}

nn::FlatParams apply_step(const nn::FlatParams& params, std::span<const double> grad,
                          double scale, const char* what) {
  std::vector<double> values(params.values().begin(), params.values().end());
  for (std::size_t j = 0; j < values.size(); ++j) values[j] += scale * grad[j];
  require_finite(values, what);
  return nn::FlatParams(params.layout_ptr(), std::move(values));
}

nn::FlatParams soft_update(const nn::FlatParams& target, const nn::FlatParams& online,
                           double tau) {
  std::vector<double> values(target.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    values[j] = tau * online[j] + (1.0 - tau) * target[j];
  }
  return nn::FlatParams(target.layout_ptr(), std::move(values));
}

double td_target(const Transition& t, double gamma, const nn::FlatParams& boot_actor,
                 const nn::FlatParams& boot_critic) {
  if (t.done || gamma == 0.0) return t.reward;
  const std::vector<double> next_action = nn::actor_forward(boot_actor, t.next_obs);
  return t.reward + gamma * nn::critic_forward(boot_critic, t.next_obs, next_action);
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidArgument("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (!std::isfinite(t.reward)) throw InvalidArgument("transition reward is not finite");
  if (data_.size() == capacity_) data_.pop_front();
  data_.push_back(std::move(t));
}

void ReplayBuffer::append(const std::vector<Transition>& ts) {
  for (const auto& t : ts) push(t);
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (data_.empty()) throw InvalidState("cannot sample from an empty replay buffer");
  std::vector<const Transition*> batch;
  batch.reserve(n);
  for (std::size_t k = 0; k < n; ++k) batch.push_back(&data_[rng.uniform_index(data_.size())]);
  return batch;
}

void AdaptConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must be in [0, 1)");
  if (critic_lr < 0.0 || actor_lr < 0.0) throw InvalidArgument("learning rates must be >= 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (grad_steps_per_adapt == 0) throw InvalidArgument("grad_steps_per_adapt must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("tau must be in (0, 1]");
}

ReplayBuffer collect_exploration_rollouts(const PointEnv& env, const Task& task,
                                          std::span<const nn::FlatParams> actors,
                                          std::size_t trajectories_per_actor,
                                          std::size_t horizon, Rng& rng) {
  if (actors.empty()) throw InvalidArgument("need at least one exploration actor");
  const std::size_t capacity = std::max<std::size_t>(1, actors.size() * trajectories_per_actor * horizon);
  ReplayBuffer buffer(capacity);
  for (const auto& actor : actors) {
    for (std::size_t n = 0; n < trajectories_per_actor; ++n) {
      buffer.append(env.rollout(actor, task, horizon, rng).transitions);
    }
  }
  return buffer;
}

double td_loss(const nn::FlatParams& critic, const nn::FlatParams& actor,
               std::span<const Transition* const> batch, double gamma) {
  double loss = 0.0;
  for (const Transition* t : batch) {
    const double err = nn::critic_forward(critic, t->obs, t->action) -
                       td_target(*t, gamma, actor, critic);
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

nn::FlatParams critic_update(const nn::FlatParams& critic, const ReplayBuffer& buffer,
                             const nn::FlatParams& actor, const AdaptConfig& cfg, Rng& rng,
                             const TargetNets* targets) {
  require_batch(buffer, cfg);
  const auto batch = buffer.sample(cfg.batch_size, rng);
  const nn::FlatParams& boot_actor = targets ? targets->actor : actor;
  const nn::FlatParams& boot_critic = targets ? targets->critic : critic;

  // Targets are computed before any gradient is taken: y is a constant.
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition* t : batch) y.push_back(td_target(*t, cfg.gamma, boot_actor, boot_critic));

  std::vector<double> grad(critic.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Transition& t = *batch[k];
    const double q = nn::critic_forward(critic, t.obs, t.action);
    // d/dq of (q - y)^2 / B
    const double upstream = 2.0 * (q - y[k]) * inv_b;
    nn::critic_backward_accumulate(critic, t.obs, t.action, upstream, grad, {});
  }
  require_finite(grad, "critic gradient");
  return apply_step(critic, grad, -cfg.critic_lr, "critic parameters");
}

nn::FlatParams actor_update(const nn::FlatParams& actor, const nn::FlatParams& critic,
                            const ReplayBuffer& buffer, const AdaptConfig& cfg, Rng& rng) {
  require_batch(buffer, cfg);
  const auto batch = buffer.sample(cfg.batch_size, rng);
  std::vector<double> grad(actor.size(), 0.0);
  std::vector<double> critic_scratch(critic.size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Transition* t : batch) {
    const std::vector<double> a = nn::actor_forward(actor, t->obs);
    std::vector<double> dq_da(a.size(), 0.0);
    nn::critic_backward_accumulate(critic, t->obs, a, inv_b, critic_scratch, dq_da);
    nn::actor_backward_accumulate(actor, t->obs, dq_da, grad);
  }
  require_finite(grad, "actor gradient");
  return apply_step(actor, grad, cfg.actor_lr, "actor parameters");
}

AdaptedPair adapt(const nn::FlatParams& init_actor, const nn::FlatParams& init_critic,
                  const ReplayBuffer& buffer, const AdaptConfig& cfg, Rng& rng) {
  if (buffer.empty()) throw InvalidArgument("adaptation buffer is empty");
  cfg.validate();
  AdaptedPair out{init_actor, init_critic};
  std::optional<TargetNets> targets;
  if (cfg.use_target_nets) targets = TargetNets{init_actor, init_critic};
  for (std::size_t round = 0; round < cfg.grad_steps_per_adapt; ++round) {
    out.critic = critic_update(out.critic, buffer, out.actor, cfg, rng,
                               targets ? &*targets : nullptr);
    out.actor = actor_update(out.actor, out.critic, buffer, cfg, rng);
    if (targets) {
      targets->actor = soft_update(targets->actor, out.actor, cfg.tau);
      targets->critic = soft_update(targets->critic, out.critic, cfg.tau);
    }
  }
  return out;
}

std::vector<double> monte_carlo_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw InvalidArgument("monte_carlo_returns needs at least one reward");
  std::vector<double> g(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    g[t] = running;
  }
  return g;
}

DdpgTrainResult train_ddpg(const PointEnv& env, const Task& task, const DdpgTrainConfig& cfg,
                           std::uint64_t seed) {
  cfg.adapt.validate();
  auto actor_layout = std::make_shared<const nn::NetLayout>(
      nn::build_actor_layout(kObsDim, kActionDim, cfg.hidden));
  auto critic_layout = std::make_shared<const nn::NetLayout>(
      nn::build_critic_layout(kObsDim, kActionDim, cfg.hidden));
  Rng init_rng(derive_seed({seed, 1}));
  DdpgTrainResult result{nn::xavier_init(actor_layout, init_rng),
                         nn::xavier_init(critic_layout, init_rng), {}};
  TargetNets targets{result.actor, result.critic};
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng noise_rng(derive_seed({seed, 2}));
  Rng batch_rng(derive_seed({seed, 3}));
  Rng env_rng(derive_seed({seed, 4}));

  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    std::vector<double> perturbed(result.actor.values().begin(), result.actor.values().end());
    for (double& w : perturbed) w += cfg.param_noise_std * noise_rng.normal();
    nn::FlatParams explorer(actor_layout, std::move(perturbed));

    PointState state = env.reset(task, env_rng);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      std::vector<double> obs = state.observation();
      std::vector<double> action = nn::actor_forward(explorer, obs);
      StepResult r = env.step(state, action, task, cfg.horizon);
      buffer.push({std::move(obs), std::move(action), r.reward, r.next.observation(), r.done});
      state = r.next;
      if (buffer.size() >= std::max(cfg.warmup_transitions, cfg.adapt.batch_size)) {
        for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
          const TargetNets* tp = cfg.adapt.use_target_nets ? &targets : nullptr;
          result.critic = critic_update(result.critic, buffer, result.actor, cfg.adapt, batch_rng, tp);
          result.actor = actor_update(result.actor, result.critic, buffer, cfg.adapt, batch_rng);
          if (cfg.adapt.use_target_nets) {
            targets.actor = soft_update(targets.actor, result.actor, cfg.adapt.tau);
            targets.critic = soft_update(targets.critic, result.critic, cfg.adapt.tau);
          }
        }
      }
      if (r.done) break;
    }
    result.eval_returns.push_back(env.rollout(result.actor, task, cfg.horizon, env_rng).episode_return);
  }
  return result;
}

}  // namespace esmeta
