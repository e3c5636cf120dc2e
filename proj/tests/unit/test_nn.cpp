#include <cmath>
#include <memory>

#include "doctest.h"
#include "esmeta/errors.hpp"
#include "esmeta/nn.hpp"
#include "support/reference_mlp.hpp"

using namespace esmeta;
using namespace esmeta::nn;

namespace {

LayoutPtr share(NetLayout l) { return std::make_shared<const NetLayout>(std::move(l)); }

std::size_t expected_count(std::size_t obs, std::size_t act, std::size_t hidden, bool critic) {
  if (critic) return obs * hidden + hidden + (hidden + act) * hidden + hidden + hidden + 1;
  return obs * hidden + hidden + hidden * hidden + hidden + hidden * act + act;
}

}  // namespace

TEST_CASE("actor layout parameter counts") {
  // 4*100+100 + 100*100+100 + 100*2+2
  CHECK(build_actor_layout(4, 2, 100).total_params() == 10802);
  CHECK(build_actor_layout(1, 1, 1).total_params() == 6);
  CHECK_THROWS_AS(build_actor_layout(0, 2, 100), InvalidArgument);
  CHECK_THROWS_AS(build_actor_layout(4, 0, 100), InvalidArgument);

  const NetLayout l = build_actor_layout(4, 2, 100);
  REQUIRE(l.layers().size() == 3);
  CHECK(l.layers()[0].activation == Activation::kRelu);
  CHECK(l.layers()[1].activation == Activation::kRelu);
  CHECK(l.layers()[2].activation == Activation::kTanh);
  CHECK_FALSE(l.action_injection().has_value());
}

TEST_CASE("critic layout parameter counts") {
  CHECK(build_critic_layout(4, 2, 100).total_params() == 10901);
  CHECK(build_critic_layout(1, 1, 1).total_params() == 7);
  CHECK_THROWS_AS(build_critic_layout(1, 0, 1), InvalidArgument);
  const NetLayout l = build_critic_layout(4, 2, 100);
  CHECK(l.action_injection() == 1u);
  CHECK(l.layers()[1].input_dim == 102);
  CHECK(l.layers()[2].activation == Activation::kIdentity);
}

TEST_CASE("parameter count formula holds for random dims") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t obs = 1 + rng.uniform_index(20);
    const std::size_t act = 1 + rng.uniform_index(6);
    const std::size_t hidden = 1 + rng.uniform_index(64);
    CHECK(build_actor_layout(obs, act, hidden).total_params() == expected_count(obs, act, hidden, false));
    CHECK(build_critic_layout(obs, act, hidden).total_params() == expected_count(obs, act, hidden, true));
  }
}

TEST_CASE("layout rejects inconsistent chains") {
  CHECK_THROWS_AS(NetLayout({{2, 3, Activation::kRelu}, {4, 1, Activation::kIdentity}}),
                  InvalidArgument);
  CHECK_THROWS_AS(NetLayout({{2, 3, Activation::kRelu}, {3, 1, Activation::kIdentity}}, 1, 1),
                  InvalidArgument);
  CHECK_NOTHROW(NetLayout({{2, 3, Activation::kRelu}, {4, 1, Activation::kIdentity}}, 1, 1));
}

TEST_CASE("xavier init bounds, zero biases and determinism") {
  auto layout = share(build_actor_layout(4, 2, 100));
  Rng rng(7);
  const FlatParams p = xavier_init(layout, rng);
  const double limit = std::sqrt(6.0 / 200.0);
  CHECK(limit == doctest::Approx(0.17321).epsilon(1e-4));
  const auto w = p.values().subspan(layout->weight_offset(1), 100 * 100);
  for (double x : w) {
    REQUIRE(x > -limit);
    REQUIRE(x < limit);
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const auto b = p.values().subspan(layout->bias_offset(l), layout->layers()[l].output_dim);
    for (double x : b) CHECK(x == 0.0);
  }
  Rng a(99), b(99);
  CHECK(xavier_init(layout, a) == xavier_init(layout, b));
}

TEST_CASE("actor forward") {
  auto layout = share(build_actor_layout(1, 1, 1));
  SUBCASE("zero params give zero action") {
    auto big = share(build_actor_layout(4, 2, 16));
    const auto a = actor_forward(FlatParams(big), std::vector<double>{1.0, -2.0, 3.0, 0.5});
    CHECK(a == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("hand-computed 1-1-1-1 net") {
    // w0=2 b0=0.5 | w1=-1.5 b1=3 | w2=0.7 b2=-0.1, obs=0.25
    // h1 = relu(1.0) = 1, h2 = relu(1.5) = 1.5, out = tanh(0.95)
    const FlatParams p(layout, {2.0, 0.5, -1.5, 3.0, 0.7, -0.1});
    const auto a = actor_forward(p, std::vector<double>{0.25});
    REQUIRE(a.size() == 1);
    CHECK(a[0] == doctest::Approx(0.7397830512740042).epsilon(1e-15));
    CHECK(actor_forward(p, std::vector<double>{0.25}) == a);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(actor_forward(FlatParams(layout), std::vector<double>{1.0, 2.0}), InvalidArgument);
  }
}

TEST_CASE("critic forward") {
  auto layout = share(build_critic_layout(1, 1, 1));
  CHECK(critic_forward(FlatParams(layout), std::vector<double>{3.0}, std::vector<double>{0.2}) == 0.0);
  // w0=1.2 b0=0.1 | w1=[0.8, -2.0] b1=0.05 | w2=-0.6 b2=0.3, obs=0.5, a=-0.4
  // h1 = 0.7, h2 = 0.56 + 0.8 + 0.05 = 1.41, q = -0.846 + 0.3
  const FlatParams p(layout, {1.2, 0.1, 0.8, -2.0, 0.05, -0.6, 0.3});
  CHECK(critic_forward(p, std::vector<double>{0.5}, std::vector<double>{-0.4}) ==
        doctest::Approx(-0.546).epsilon(1e-14));
  CHECK_THROWS_AS(critic_forward(p, std::vector<double>{0.5}, std::vector<double>{0.1, 0.2}),
                  InvalidArgument);
}

TEST_CASE("backward special cases") {
  auto critic_layout = share(build_critic_layout(3, 2, 5));
  auto actor_layout = share(build_actor_layout(3, 2, 5));
  const std::vector<double> obs{0.3, -0.7, 1.1};
  const std::vector<double> act{0.2, -0.5};

  const BackpropResult zero = critic_backward(FlatParams(critic_layout), obs, act, 1.0);
  CHECK(zero.input_grads == std::vector<double>{0.0, 0.0});

  Rng rng(5);
  const FlatParams critic = xavier_init(critic_layout, rng);
  const FlatParams actor = xavier_init(actor_layout, rng);
  const BackpropResult one = critic_backward(critic, obs, act, 1.0);
  const BackpropResult two = critic_backward(critic, obs, act, 2.0);
  for (std::size_t j = 0; j < one.param_grads.size(); ++j) CHECK(two.param_grads[j] == 2.0 * one.param_grads[j]);
  for (std::size_t k = 0; k < 2; ++k) CHECK(two.input_grads[k] == 2.0 * one.input_grads[k]);

  const auto none = actor_backward(actor, obs, std::vector<double>{0.0, 0.0});
  for (double g : none) CHECK(g == 0.0);

  const std::vector<double> up{0.4, -1.3};
  const auto single = actor_backward(actor, obs, up);
  std::vector<double> batch(actor.size(), 0.0);
  actor_backward_accumulate(actor, obs, up, batch);
  actor_backward_accumulate(actor, obs, up, batch);
  for (std::size_t j = 0; j < batch.size(); ++j) CHECK(batch[j] == 2.0 * single[j]);

  CHECK_THROWS_AS(actor_backward(actor, obs, std::vector<double>{1.0}), InvalidArgument);
  CHECK_THROWS_AS(critic_backward(critic, obs, std::vector<double>{1.0}, 1.0), InvalidArgument);
}

TEST_CASE("analytic gradients match finite differences on random small nets") {
  using namespace esmeta::testing;
  Rng rng(2024);
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const std::size_t obs_dim = 1 + rng.uniform_index(8);
    const std::size_t act_dim = 1 + rng.uniform_index(8);
    const std::size_t hidden = 1 + rng.uniform_index(8);
    auto al = share(build_actor_layout(obs_dim, act_dim, hidden));
    auto cl = share(build_critic_layout(obs_dim, act_dim, hidden));
    std::vector<double> ta(al->total_params()), tc(cl->total_params());
    for (double& x : ta) x = rng.uniform(-1.0, 1.0);
    for (double& x : tc) x = rng.uniform(-1.0, 1.0);
    std::vector<double> obs(obs_dim), act(act_dim), up(act_dim);
    for (double& x : obs) x = rng.uniform(-1.0, 1.0);
    for (double& x : act) x = rng.uniform(-1.0, 1.0);
    for (double& x : up) x = rng.uniform(-1.0, 1.0);

    const RefNet ra = ref_actor(obs_dim, act_dim, hidden);
    const RefNet rc = ref_critic(obs_dim, act_dim, hidden);
    // Skip draws that sit within reach of a ReLU kink; differences are
    // meaningless there.
    if (ref_forward(ra, widen(ta), widen(obs), {}).min_abs_relu_preact < 1e-3L) continue;
    if (ref_forward(rc, widen(tc), widen(obs), widen(act)).min_abs_relu_preact < 1e-3L) continue;

    const auto fd_actor = ref_fd_gradients(ra, widen(ta), widen(obs), {}, widen(up));
    const auto an_actor = actor_backward(FlatParams(al, ta), obs, up);
    const auto fd_critic = ref_fd_gradients(rc, widen(tc), widen(obs), widen(act), {1.0L});
    const auto an_critic = critic_backward(FlatParams(cl, tc), obs, act, 1.0);

    worst = std::max({worst, max_relative_error(an_actor, fd_actor.params),
                      max_relative_error(an_critic.param_grads, fd_critic.params),
                      max_relative_error(an_critic.input_grads, fd_critic.action)});
    ++checked;
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("flatten/unflatten round trip") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto layout = share(trial % 2 ? build_critic_layout(1 + rng.uniform_index(6), 1 + rng.uniform_index(3),
                                                        1 + rng.uniform_index(9))
                                  : build_actor_layout(1 + rng.uniform_index(6), 1 + rng.uniform_index(3),
                                                       1 + rng.uniform_index(9)));
    std::vector<double> v(layout->total_params());
    for (double& x : v) x = rng.normal();
    const FlatParams p(layout, v);
    const auto layers = unflatten(p);
    CHECK(flatten(layout, layers) == p);
  }
}

TEST_CASE("flat params reject non-finite values and wrong lengths") {
  auto layout = share(build_actor_layout(1, 1, 1));
  CHECK_THROWS_AS(FlatParams(layout, std::vector<double>(5, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(FlatParams(layout, {0, 0, NAN, 0, 0, 0}), InvalidArgument);
}
