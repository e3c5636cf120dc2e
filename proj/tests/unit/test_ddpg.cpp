#include <cmath>

#include "doctest.h"
#include "esmeta/ddpg.hpp"
#include "esmeta/errors.hpp"
#include "support/reference_mlp.hpp"

using namespace esmeta;
namespace ref = esmeta::testing;

namespace {

nn::LayoutPtr actor_layout(std::size_t obs, std::size_t act, std::size_t hidden) {
  return std::make_shared<const nn::NetLayout>(nn::build_actor_layout(obs, act, hidden));
}
nn::LayoutPtr critic_layout(std::size_t obs, std::size_t act, std::size_t hidden) {
  return std::make_shared<const nn::NetLayout>(nn::build_critic_layout(obs, act, hidden));
}

Transition make_transition(double x, double a, double r, double x_next, bool done) {
  return {{x}, {a}, r, {x_next}, done};
}

ReplayBuffer random_buffer(std::size_t n, std::size_t obs, std::size_t act, Rng& rng) {
  ReplayBuffer buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    for (std::size_t k = 0; k < obs; ++k) {
      t.obs.push_back(rng.uniform(-1, 1));
      t.next_obs.push_back(rng.uniform(-1, 1));
    }
    for (std::size_t k = 0; k < act; ++k) t.action.push_back(rng.uniform(-1, 1));
    t.reward = rng.uniform(-1, 1);
    t.done = rng.uniform() < 0.1;
    buf.push(std::move(t));
  }
  return buf;
}

double batch_mean_q(const nn::FlatParams& critic, const nn::FlatParams& actor,
                    const ReplayBuffer& buf) {
  double s = 0.0;
  for (const auto& t : buf) s += nn::critic_forward(critic, t.obs, nn::actor_forward(actor, t.obs));
  return s / static_cast<double>(buf.size());
}

double param_distance(const nn::FlatParams& a, const nn::FlatParams& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("replay buffer FIFO eviction preserves order") {
  ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) buf.push(make_transition(i, 0, i, 0, false));
  REQUIRE(buf.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf[i].reward == static_cast<double>(i + 3));
  CHECK_THROWS_AS(ReplayBuffer(0), InvalidArgument);
  CHECK_THROWS_AS(buf.push(make_transition(0, 0, NAN, 0, false)), InvalidArgument);

  Rng rng(1);
  const auto batch = buf.sample(100, rng);
  CHECK(batch.size() == 100);
  for (const auto* t : batch) CHECK((t->reward >= 3 && t->reward <= 7));
  ReplayBuffer empty(3);
  CHECK_THROWS_AS(empty.sample(1, rng), InvalidState);
}

TEST_CASE("collect_exploration_rollouts counts and determinism") {
  const PointEnv env;
  Rng rng(2);
  const Task task = env.sample_task(TaskFamily::kGoalVelocity, rng);
  auto layout = actor_layout(kObsDim, kActionDim, 8);
  std::vector<nn::FlatParams> actors;
  for (int k = 0; k < 20; ++k) actors.push_back(nn::xavier_init(layout, rng));

  Rng r1(9), r2(9);
  const auto buf = collect_exploration_rollouts(env, task, actors, 1, 200, r1);
  CHECK(buf.size() == 4000);
  CHECK(buf == collect_exploration_rollouts(env, task, actors, 1, 200, r2));
  // Each trajectory is produced by its own actor.
  for (std::size_t k = 0; k < 20; ++k) {
    const auto& t = buf[k * 200 + 17];
    CHECK(t.action == nn::actor_forward(actors[k], t.obs));
  }

  const std::vector<nn::FlatParams> one(actors.begin(), actors.begin() + 1);
  CHECK(collect_exploration_rollouts(env, task, one, 1, 1, r1).size() == 1);
  CHECK(collect_exploration_rollouts(env, task, one, 3, 7, r1).size() == 21);
  CHECK_THROWS_AS(collect_exploration_rollouts(env, task, std::span<const nn::FlatParams>{}, 1, 5, r1),
                  InvalidArgument);
}

TEST_CASE("critic_update: zero loss, zero lr, insufficient buffer") {
  auto layout = critic_layout(1, 1, 3);
  Rng rng(3);
  const auto critic = nn::xavier_init(layout, rng);
  const auto actor = nn::xavier_init(actor_layout(1, 1, 3), rng);
  AdaptConfig cfg{.gamma = 0.0, .critic_lr = 0.1, .actor_lr = 0.1, .batch_size = 8};

  ReplayBuffer exact(10);
  for (int i = 0; i < 10; ++i) {
    const double x = rng.uniform(-1, 1), a = rng.uniform(-1, 1);
    const double q = nn::critic_forward(critic, std::vector<double>{x}, std::vector<double>{a});
    exact.push(make_transition(x, a, q, 0.0, false));
  }
  CHECK(param_distance(critic_update(critic, exact, actor, cfg, rng), critic) < 1e-12);

  auto buf = random_buffer(10, 1, 1, rng);
  AdaptConfig frozen = cfg;
  frozen.critic_lr = 0.0;
  CHECK(critic_update(critic, buf, actor, frozen, rng) == critic);

  cfg.batch_size = 11;
  CHECK_THROWS_AS(critic_update(critic, buf, actor, cfg, rng), InvalidState);
  CHECK_THROWS_AS(actor_update(actor, critic, buf, cfg, rng), InvalidState);
}

TEST_CASE("critic_update matches a finite-difference SGD step on a 2-transition buffer") {
  // 1-dim observation and action. The TD target is held fixed at its
  // pre-update value (semi-gradient), so the reference step is
  // -lr * d/dphi mean_b (Q(s_b, a_b; phi) - y_b)^2 with y from the oracle.
  auto clayout = critic_layout(1, 1, 2);
  auto alayout = actor_layout(1, 1, 2);
  Rng rng(4);
  const auto critic = nn::xavier_init(clayout, rng);
  const auto actor = nn::xavier_init(alayout, rng);
  const auto rc = ref::ref_critic(1, 1, 2);
  const auto ra = ref::ref_actor(1, 1, 2);

  ReplayBuffer buf(2);
  buf.push(make_transition(0.3, -0.5, 1.0, 0.4, false));
  buf.push(make_transition(-0.7, 0.2, -0.5, 0.0, true));
  AdaptConfig cfg{.gamma = 0.5, .critic_lr = 0.05, .actor_lr = 0.0, .batch_size = 2};

  Rng sample_rng(77);
  Rng replay = sample_rng;
  const auto batch = buf.sample(cfg.batch_size, replay);
  const auto updated = critic_update(critic, buf, actor, cfg, sample_rng);

  const auto phi = ref::widen(critic.values());
  std::vector<long double> y;
  for (const auto* t : batch) {
    long double target = t->reward;
    if (!t->done) {
      const auto a_next = ref::ref_forward(ra, ref::widen(actor.values()), ref::widen(t->next_obs), {}).output;
      target += 0.5L * ref::ref_forward(rc, phi, ref::widen(t->next_obs), a_next).output[0];
    }
    y.push_back(target);
  }
  auto loss = [&](const std::vector<long double>& p) {
    long double s = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const long double q = ref::ref_forward(rc, p, ref::widen(batch[b]->obs), ref::widen(batch[b]->action)).output[0];
      s += (q - y[b]) * (q - y[b]);
    }
    return s / batch.size();
  };
  std::vector<double> expected(critic.size());
  auto p = phi;
  const long double h = 1e-6L;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = phi[j] + h;
    const long double fp = loss(p);
    p[j] = phi[j] - h;
    const long double fm = loss(p);
    p[j] = phi[j];
    expected[j] = static_cast<double>(phi[j] - 0.05L * (fp - fm) / (2 * h));
  }
  const std::vector<double> got(updated.values().begin(), updated.values().end());
  for (std::size_t j = 0; j < got.size(); ++j) CHECK(got[j] == doctest::Approx(expected[j]).epsilon(1e-8));
}

TEST_CASE("actor_update: identities and the Q(s, a) = a toy") {
  auto alayout = actor_layout(1, 1, 3);
  auto clayout = critic_layout(1, 1, 3);
  Rng rng(5);
  const auto actor = nn::xavier_init(alayout, rng);
  const auto buf = random_buffer(32, 1, 1, rng);
  AdaptConfig cfg{.gamma = 0.0, .critic_lr = 0.0, .actor_lr = 0.0, .batch_size = 16};
  const auto critic = nn::xavier_init(clayout, rng);

  CHECK(actor_update(actor, critic, buf, cfg, rng) == actor);
  cfg.actor_lr = 0.1;
  CHECK(actor_update(actor, nn::FlatParams(clayout), buf, cfg, rng) == actor);

  // Critic Q(s, a) = a: hidden-2 unit 0 is relu(a) - relu(-a) via two units.
  std::vector<double> q(clayout->total_params(), 0.0);
  const auto& L = *clayout;
  const std::size_t w1 = L.weight_offset(1), b2 = L.weight_offset(2);
  const std::size_t in1 = L.layers()[1].input_dim;  // 3 hidden + 1 action
  q[w1 + 0 * in1 + 3] = 1.0;   // unit 0 = relu(a)
  q[w1 + 1 * in1 + 3] = -1.0;  // unit 1 = relu(-a)
  q[b2 + 0] = 1.0;
  q[b2 + 1] = -1.0;
  const nn::FlatParams identity_q(clayout, q);
  for (double a : {-0.7, 0.2, 0.9}) {
    CHECK(nn::critic_forward(identity_q, std::vector<double>{0.1}, std::vector<double>{a}) ==
          doctest::Approx(a));
  }

  const auto moved = actor_update(actor, identity_q, buf, cfg, rng);
  // Direction check against the finite-difference ascent direction of the
  // batch-mean actor output on the same states.
  const auto ra = ref::ref_actor(1, 1, 3);
  const auto theta = ref::widen(actor.values());
  std::vector<double> fd(actor.size());
  for (const auto& t : buf) {
    const auto g = ref::ref_fd_gradients(ra, theta, ref::widen(t.obs), {}, {1.0L});
    for (std::size_t j = 0; j < fd.size(); ++j) fd[j] += g.params[j];
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < fd.size(); ++j) dot += (moved[j] - actor[j]) * fd[j];
  CHECK(dot > 0.0);
  CHECK(batch_mean_q(identity_q, moved, buf) > batch_mean_q(identity_q, actor, buf));
}

TEST_CASE("adapt runs the configured number of rounds and leaves inputs intact") {
  const PointEnv env;
  Rng rng(6);
  auto alayout = actor_layout(kObsDim, kActionDim, 8);
  auto clayout = critic_layout(kObsDim, kActionDim, 8);
  const auto actor = nn::xavier_init(alayout, rng);
  const auto critic = nn::xavier_init(clayout, rng);
  const Task task = env.sample_task(TaskFamily::kGoalVelocity, rng);
  const std::vector<nn::FlatParams> explorers{actor};
  const auto buf = collect_exploration_rollouts(env, task, explorers, 1, 50, rng);
  const auto actor_copy = actor;
  const auto critic_copy = critic;

  AdaptConfig cfg{.gamma = 0.9, .critic_lr = 1e-2, .actor_lr = 1e-2, .batch_size = 16};
  for (std::size_t steps : {1u, 3u}) {
    cfg.grad_steps_per_adapt = steps;
    Rng a(100), b(100);
    const auto out = adapt(actor, critic, buf, cfg, a);
    nn::FlatParams c = critic, p = actor;
    for (std::size_t s = 0; s < steps; ++s) {
      c = critic_update(c, buf, p, cfg, b);
      p = actor_update(p, c, buf, cfg, b);
    }
    CHECK(out.actor == p);
    CHECK(out.critic == c);
    CHECK(actor == actor_copy);
    CHECK(critic == critic_copy);
  }

  cfg.critic_lr = cfg.actor_lr = 0.0;
  const auto same = adapt(actor, critic, buf, cfg, rng);
  CHECK(same.actor == actor);
  CHECK(same.critic == critic);
  CHECK_THROWS_AS(adapt(actor, critic, ReplayBuffer(4), cfg, rng), InvalidArgument);
}

TEST_CASE("monte_carlo_returns") {
  const double r[] = {1, 1, 1};
  CHECK(monte_carlo_returns(r, 0.5) == std::vector<double>{1.75, 1.5, 1.0});
  CHECK(monte_carlo_returns(r, 0.0) == std::vector<double>{1, 1, 1});
  const double one[] = {-2.5};
  CHECK(monte_carlo_returns(one, 0.9) == std::vector<double>{-2.5});
  CHECK_THROWS_AS(monte_carlo_returns(std::span<const double>{}, 0.9), InvalidArgument);
}

TEST_CASE("AdaptConfig validation") {
  CHECK_NOTHROW(AdaptConfig{}.validate());
  CHECK_THROWS_AS((AdaptConfig{.gamma = 1.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AdaptConfig{.batch_size = 0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AdaptConfig{.grad_steps_per_adapt = 0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AdaptConfig{.tau = 0.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AdaptConfig{.critic_lr = -1.0}.validate()), InvalidArgument);
}

TEST_CASE("small-lr critic steps do not increase TD loss on a frozen batch") {
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    const auto critic = nn::xavier_init(critic_layout(3, 2, 8), rng);
    const auto actor = nn::xavier_init(actor_layout(3, 2, 8), rng);
    const auto buf = random_buffer(32, 3, 2, rng);
    std::vector<const Transition*> batch;
    for (const auto& t : buf) batch.push_back(&t);
    // gamma 0 keeps the regression target fixed, as the batch itself is.
    AdaptConfig cfg{.gamma = 0.0, .critic_lr = 1e-3, .batch_size = 32};
    const double before = td_loss(critic, actor, batch, 0.0);
    auto c = critic;
    for (int s = 0; s < 5; ++s) c = critic_update(c, buf, actor, cfg, rng);
    ok += td_loss(c, actor, batch, 0.0) <= before;
  }
  CHECK(ok >= 95);
}

TEST_CASE("small-lr actor steps do not decrease batch-mean Q") {
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(2000 + trial);
    const auto critic = nn::xavier_init(critic_layout(3, 2, 8), rng);
    const auto actor = nn::xavier_init(actor_layout(3, 2, 8), rng);
    const auto buf = random_buffer(64, 3, 2, rng);
    AdaptConfig cfg{.gamma = 0.0, .actor_lr = 1e-3, .batch_size = 32};
    // Replay the update's batch draw to measure Q on the same states.
    Rng replay = rng;
    ReplayBuffer frozen(cfg.batch_size);
    for (const auto* t : buf.sample(cfg.batch_size, replay)) frozen.push(*t);
    const double before = batch_mean_q(critic, actor, frozen);
    const auto moved = actor_update(actor, critic, buf, cfg, rng);
    ok += batch_mean_q(critic, moved, frozen) >= before;
  }
  CHECK(ok >= 95);
}

TEST_CASE("standalone DDPG solves the single-goal velocity task") {
  const PointEnv env;
  const Task task{TaskFamily::kGoalVelocity, {1.0, 0.0}, 0};
  DdpgTrainConfig cfg;
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto result = train_ddpg(env, task, cfg, seed);
    REQUIRE(result.eval_returns.size() == cfg.episodes);
    double best_avg = -1e300;
    for (std::size_t e = 10; e <= result.eval_returns.size(); ++e) {
      double s = 0.0;
      for (std::size_t k = e - 10; k < e; ++k) s += result.eval_returns[k];
      best_avg = std::max(best_avg, s / 10.0);
    }
    MESSAGE("seed " << seed << " best 10-episode average " << best_avg << " final "
                    << result.eval_returns.back());
    solved += best_avg >= -20.0;
  }
  CHECK(solved >= 4);
}
