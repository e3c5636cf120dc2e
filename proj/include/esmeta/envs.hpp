#ifndef ESMETA_ENVS_HPP_
#define ESMETA_ENVS_HPP_

// 2D point-mass task families. The goal is hidden from the agent: the
// observation is position ++ velocity, so a policy can only infer the task
// from rewards.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "esmeta/nn.hpp"
#include "esmeta/rng.hpp"
#include "esmeta/transition.hpp"

namespace esmeta {

using Vec2 = std::array<double, 2>;

enum class TaskFamily { kGoalVelocity, kGoalDirection, kGoalPosition };

// "point-vel", "point-dir", "point-goal". Throws InvalidArgument otherwise.
TaskFamily parse_task_family(std::string_view name);
std::string_view task_family_name(TaskFamily family);

struct EnvParams {
  double dt = 0.05;
  double a_max = 4.0;
  double v_max = 3.0;
  double velocity_goal_max = 2.0;  // goal speed ~ U[0, velocity_goal_max]
  double position_goal_extent = 2.0;  // goal position ~ U[-e, e]^2
};

inline constexpr std::size_t kObsDim = 4;
inline constexpr std::size_t kActionDim = 2;

struct Task {
  TaskFamily family = TaskFamily::kGoalVelocity;
  // Speed (goal[0]) for goal_velocity, +1/-1 (goal[0]) for goal_direction,
  // target point for goal_position.
  Vec2 goal{0.0, 0.0};
  std::uint64_t task_seed = 0;

  bool operator==(const Task&) const = default;
};

struct PointState {
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
  std::size_t step_index = 0;

  std::vector<double> observation() const;
};

struct StepResult {
  PointState next;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  std::vector<Transition> transitions;
  double episode_return = 0.0;

  std::vector<double> rewards() const;
};

class PointEnv {
 public:
  explicit PointEnv(EnvParams params = {}) : params_(params) {}

  const EnvParams& params() const { return params_; }

  Task sample_task(TaskFamily family, Rng& rng) const;
  PointState reset(const Task& task, Rng& rng) const;
  // Semi-implicit Euler step. Actions are clipped to [-1, 1]^2.
  StepResult step(const PointState& state, std::span<const double> action, const Task& task,
                  std::size_t horizon) const;
  // Runs the deterministic actor for exactly `horizon` steps.
  Trajectory rollout(const nn::FlatParams& actor, const Task& task, std::size_t horizon,
                     Rng& rng) const;

 private:
  EnvParams params_;
};

}  // namespace esmeta

#endif  // ESMETA_ENVS_HPP_
