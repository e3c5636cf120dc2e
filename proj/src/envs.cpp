#include "esmeta/envs.hpp"

#include <algorithm>
#include <cmath>

#include "esmeta/errors.hpp"

namespace esmeta {

TaskFamily parse_task_family(std::string_view name) {
  if (name == "point-vel") return TaskFamily::kGoalVelocity;
  if (name == "point-dir") return TaskFamily::kGoalDirection;
  if (name == "point-goal") return TaskFamily::kGoalPosition;
  throw InvalidArgument("unknown task family '" + std::string(name) + "'");
}

std::string_view task_family_name(TaskFamily family) {
  switch (family) {
    case TaskFamily::kGoalVelocity: return "point-vel";
    case TaskFamily::kGoalDirection: return "point-dir";
    case TaskFamily::kGoalPosition: return "point-goal";
  }
  return "point-vel";
}

std::vector<double> PointState::observation() const {
  return {position[0], position[1], velocity[0], velocity[1]};
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(transitions.size());
  for (const auto& t : transitions) r.push_back(t.reward);
  return r;
}

Task PointEnv::sample_task(TaskFamily family, Rng& rng) const {
  Task task;
  task.family = family;
  switch (family) {
    case TaskFamily::kGoalVelocity:
      task.goal = {rng.uniform(0.0, params_.velocity_goal_max), 0.0};
      break;
    case TaskFamily::kGoalDirection:
      task.goal = {rng.uniform() < 0.5 ? -1.0 : 1.0, 0.0};
      break;
    case TaskFamily::kGoalPosition: {
      const double e = params_.position_goal_extent;
      const double x = rng.uniform(-e, e);
      task.goal = {x, rng.uniform(-e, e)};
      break;
    }
  }
  task.task_seed = rng.next_u64();
  return task;
}

PointState PointEnv::reset(const Task& /*task*/, Rng& /*rng*/) const { return PointState{}; }

StepResult PointEnv::step(const PointState& state, std::span<const double> action,
                          const Task& task, std::size_t horizon) const {
  if (action.size() != kActionDim) throw InvalidArgument("action must have 2 components");
  StepResult out;
  Vec2 v;
  for (int k = 0; k < 2; ++k) {
    const double a = std::clamp(action[k], -1.0, 1.0);
    v[k] = state.velocity[k] + a * params_.a_max * params_.dt;
  }
  const double speed = std::hypot(v[0], v[1]);
  if (speed > params_.v_max) {
    const double scale = params_.v_max / speed;
    v = {v[0] * scale, v[1] * scale};
  }
  out.next.velocity = v;
  out.next.position = {state.position[0] + v[0] * params_.dt,
                       state.position[1] + v[1] * params_.dt};
  out.next.step_index = state.step_index + 1;

  switch (task.family) {
    case TaskFamily::kGoalVelocity:
      out.reward = -std::abs(std::hypot(v[0], v[1]) - task.goal[0]);
      break;
    case TaskFamily::kGoalDirection:
      out.reward = task.goal[0] * v[0];
      break;
    case TaskFamily::kGoalPosition:
      out.reward = -std::hypot(out.next.position[0] - task.goal[0],
                               out.next.position[1] - task.goal[1]);
      break;
  }
  out.done = out.next.step_index >= horizon;
  return out;
}

Trajectory PointEnv::rollout(const nn::FlatParams& actor, const Task& task, std::size_t horizon,
                             Rng& rng) const {
  if (horizon == 0) throw InvalidArgument("horizon must be >= 1");
  Trajectory traj;
  traj.transitions.reserve(horizon);
  PointState state = reset(task, rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<double> obs = state.observation();
    std::vector<double> action = nn::actor_forward(actor, obs);
    StepResult r = step(state, action, task, horizon);
    traj.episode_return += r.reward;
    traj.transitions.push_back(
        {std::move(obs), std::move(action), r.reward, r.next.observation(), r.done});
    state = r.next;
    if (r.done) break;
  }
  return traj;
}

}  // namespace esmeta
