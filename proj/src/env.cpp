#include "celldeploy/env.hpp"

#include <algorithm>
#include <numbers>

#include "celldeploy/errors.hpp"
#include "celldeploy/prompt.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy {

namespace {
constexpr double kPi = std::numbers::pi;
}

const ActionBounds& action_bounds() {
  static const ActionBounds bounds{{-500.0, -500.0, 20.0, -kPi, -kPi / 2, -kPi},
                                   {500.0, 500.0, 120.0, kPi, kPi / 2, kPi}};
  return bounds;
}

Action scale_action(const RawAction& raw) {
  const ActionBounds& b = action_bounds();
  std::array<double, kActionDim> v{};
  for (int i = 0; i < kActionDim; ++i) {
    const double r = std::clamp(raw[i], -1.0, 1.0);
    const double mid = 0.5 * (b.lo[i] + b.hi[i]);
    const double half = 0.5 * (b.hi[i] - b.lo[i]);
    v[i] = mid + half * r;
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

RawAction unscale_action(const Action& a) {
  const ActionBounds& b = action_bounds();
  const std::array<double, kActionDim> v{a.x, a.y, a.z, a.alpha, a.theta, a.phi};
  RawAction raw{};
  for (int i = 0; i < kActionDim; ++i) {
    const double mid = 0.5 * (b.lo[i] + b.hi[i]);
    const double half = 0.5 * (b.hi[i] - b.lo[i]);
    raw[i] = (v[i] - mid) / half;
  }
  return raw;
}

bool within_bounds(const Action& a) {
  const ActionBounds& b = action_bounds();
  const std::array<double, kActionDim> v{a.x, a.y, a.z, a.alpha, a.theta, a.phi};
  for (int i = 0; i < kActionDim; ++i)
    if (!(v[i] >= b.lo[i] && v[i] <= b.hi[i])) return false;
  return true;
}

TxConfig tx_config(const Scenario& scenario, const Action& a) {
  return {{a.x, a.y, a.z}, {a.alpha, a.theta, a.phi}, scenario.tx_power_dbm, scenario.antenna};
}

double reward(std::span<const double> user_powers, std::span<const double> weights) {
  if (user_powers.size() != weights.size())
    throw LengthMismatch("reward: " + std::to_string(user_powers.size()) + " powers vs " +
                         std::to_string(weights.size()) + " weights");
  double r = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) r += weights[i] * user_powers[i];
  return r;
}

std::vector<double> scaled_reward_weights(std::size_t n_users) {
  return std::vector<double>(n_users, 1.0 / (static_cast<double>(n_users) * 40.0));
}

State make_state(const Scenario& scenario, std::shared_ptr<const CoverageMap> map) {
  State s;
  s.user_powers.reserve(scenario.users.size());
  for (const UserSpec& u : scenario.users) s.user_powers.push_back(user_power(*map, u));
  s.prompt = render_prompt(scenario.users, s.user_powers);
  s.map = std::move(map);
  return s;
}

Action canonical_action(const Scenario& scenario) {
  const Rect& b = scenario.scene.bounds;
  return {0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y), 70.0, 0.0, 0.0, 0.0};
}

State reset(const Scenario& scenario, std::uint64_t /*seed*/) {
  validate(scenario);
  auto map = std::make_shared<const CoverageMap>(compute_coverage_map(scenario, tx_config(scenario, canonical_action(scenario))));
  return make_state(scenario, std::move(map));
}

StepResult step(const State& /*state*/, const Action& action, const Scenario& scenario) {
  auto map = std::make_shared<const CoverageMap>(compute_coverage_map(scenario, tx_config(scenario, action)));
  StepResult result;
  result.next_state = make_state(scenario, std::move(map));
  std::vector<double> weights;
  weights.reserve(scenario.users.size());
  for (const UserSpec& u : scenario.users) weights.push_back(u.weight);
  result.reward = reward(result.next_state.user_powers, weights);
  return result;
}

std::vector<double> random_placement_rewards(const Scenario& scenario, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("samples", "must be >= 1");
  validate(scenario);
  Rng rng(derive_seed(seed, "baseline"));
  const State s0 = reset(scenario, seed);
  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RawAction raw{};
    for (double& v : raw) v = rng.uniform(-1.0, 1.0);
    rewards.push_back(step(s0, scale_action(raw), scenario).reward);
  }
  return rewards;
}

PlacementEnv::PlacementEnv(std::shared_ptr<const Scenario> scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)), seed_(seed) {
  validate(*scenario_);
}

State PlacementEnv::reset() const { return celldeploy::reset(*scenario_, seed_); }

StepResult PlacementEnv::step(const State& state, std::span<const double> raw_action) const {
  if (raw_action.size() != kActionDim) throw LengthMismatch("PlacementEnv::step: expected 6 action components");
  RawAction raw{};
  std::copy(raw_action.begin(), raw_action.end(), raw.begin());
  return celldeploy::step(state, scale_action(raw), *scenario_);
}

}  // namespace celldeploy
