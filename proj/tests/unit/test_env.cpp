#include <doctest.h>

#include <numbers>

#include "celldeploy/env.hpp"
#include "celldeploy/errors.hpp"
#include "celldeploy/rng.hpp"

using namespace celldeploy;

namespace {

Scenario small_case() { return with_grid(load_scenario(bundled_scenario_dir() / "case1.json"), 60, 74); }

RawAction random_raw(Rng& rng) {
  RawAction r{};
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  return r;
}

}  // namespace

TEST_CASE("action scaling is a bijection onto the action box") {
  const ActionBounds& b = action_bounds();
  CHECK(b.lo[0] == -500);
  CHECK(b.hi[2] == 120);
  CHECK(b.lo[4] == doctest::Approx(-std::numbers::pi / 2));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const RawAction raw = random_raw(rng);
    const Action a = scale_action(raw);
    CHECK(within_bounds(a));
    const RawAction back = unscale_action(a);
    for (int k = 0; k < kActionDim; ++k) CHECK(std::abs(back[k] - raw[k]) < 1e-12);
  }
  const Action lo = scale_action({-1, -1, -1, -1, -1, -1});
  const Action hi = scale_action({1, 1, 1, 1, 1, 1});
  CHECK(lo.z == 20);
  CHECK(hi.z == 120);
  CHECK(hi.phi == doctest::Approx(std::numbers::pi));
  // Inputs outside the cube are clamped.
  CHECK(scale_action({5, -5, 2, 0, 0, 0}) == scale_action({1, -1, 1, 0, 0, 0}));
  CHECK_FALSE(within_bounds({0, 0, 10, 0, 0, 0}));
}

TEST_CASE("reward fixed points and linearity") {
  for (std::size_t n : {1u, 5u, 16u}) {
    const auto w = scaled_reward_weights(n);
    CHECK(reward(std::vector<double>(n, 40.0), w) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(reward(std::vector<double>(n, -80.0), w) == doctest::Approx(-2.0).epsilon(1e-15));
  }
  Rng rng(11);
  std::vector<double> k(7), a(7), ca(7);
  for (std::size_t i = 0; i < 7; ++i) {
    k[i] = rng.uniform(-150, 0);
    a[i] = rng.uniform(0, 1);
    ca[i] = 4.0 * a[i];
  }
  CHECK(reward(k, ca) == 4.0 * reward(k, a));
  CHECK_THROWS_AS(reward(k, std::vector<double>(3, 1.0)), LengthMismatch);
}

TEST_CASE("argmax over candidates is invariant to positive weight scaling") {
  const Scenario s = small_case();
  const State s0 = reset(s, 0);
  Rng rng(21);
  std::vector<std::vector<double>> powers;
  for (int i = 0; i < 100; ++i) powers.push_back(step(s0, scale_action(random_raw(rng)), s).next_state.user_powers);
  std::vector<double> w;
  for (const auto& u : s.users) w.push_back(u.weight);
  const auto argmax = [&](double c) {
    std::vector<double> cw(w);
    for (double& v : cw) v *= c;
    int best = 0;
    for (int i = 1; i < 100; ++i)
      if (reward(powers[i], cw) > reward(powers[best], cw)) best = i;
    return best;
  };
  const int ref = argmax(1.0);
  for (double c : {0.01, 3.0, 1000.0}) CHECK(argmax(c) == ref);
}

TEST_CASE("reset and step are pure") {
  const Scenario s = small_case();
  const State a = reset(s, 0);
  const State b = reset(s, 99);
  CHECK(*a.map == *b.map);
  CHECK(a.prompt == b.prompt);
  CHECK(a.user_powers.size() == s.users.size());

  Rng rng(5);
  const Action act = scale_action(random_raw(rng));
  const StepResult r1 = step(a, act, s);
  const StepResult r2 = step(r1.next_state, act, s);
  CHECK(r1.reward == r2.reward);
  CHECK(*r1.next_state.map == *r2.next_state.map);
  CHECK(r1.next_state.prompt == r2.next_state.prompt);

  std::vector<double> w;
  for (const auto& u : s.users) w.push_back(u.weight);
  CHECK(r1.reward == reward(r1.next_state.user_powers, w));
  for (std::size_t i = 0; i < s.users.size(); ++i)
    CHECK(r1.next_state.user_powers[i] == user_power(*r1.next_state.map, s.users[i]));
}

TEST_CASE("placement env wrapper") {
  auto s = std::make_shared<const Scenario>(small_case());
  const PlacementEnv env(s);
  const State st = env.reset();
  const std::vector<double> raw{0.1, -0.2, 0.3, 0.0, 0.5, -0.5};
  RawAction arr{};
  std::copy(raw.begin(), raw.end(), arr.begin());
  CHECK(env.step(st, raw).reward == step(st, scale_action(arr), *s).reward);
  CHECK_THROWS_AS(env.step(st, std::vector<double>(5, 0.0)), LengthMismatch);

  Scenario bad = *s;
  bad.users.clear();
  CHECK_THROWS_AS(PlacementEnv(std::make_shared<const Scenario>(bad)), ValidationError);
}

TEST_CASE("random placement baseline is deterministic") {
  const Scenario s = small_case();
  const auto a = random_placement_rewards(s, 10, 4);
  CHECK(a == random_placement_rewards(s, 10, 4));
  CHECK(a != random_placement_rewards(s, 10, 5));
  CHECK(a.size() == 10);
  CHECK_THROWS_AS(random_placement_rewards(s, 0, 4), ValidationError);
}
