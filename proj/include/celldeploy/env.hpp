#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "celldeploy/radio.hpp"
#include "celldeploy/scene.hpp"

namespace celldeploy {

inline constexpr int kActionDim = 6;
using RawAction = std::array<double, kActionDim>;

/// Base-station placement: position in meters, orientation in radians.
struct Action {
  double x = 0.0;
  double y = 0.0;
  double z = 70.0;
  double alpha = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  bool operator==(const Action&) const = default;
};

struct ActionBounds {
  std::array<double, kActionDim> lo;
  std::array<double, kActionDim> hi;
};
const ActionBounds& action_bounds();

/// Componentwise affine map of [-1, 1]^6 onto the action box (inputs clamped).
Action scale_action(const RawAction& raw);
RawAction unscale_action(const Action& action);
bool within_bounds(const Action& action);

TxConfig tx_config(const Scenario& scenario, const Action& action);

struct State {
  std::shared_ptr<const CoverageMap> map;
  std::vector<double> user_powers;
  std::string prompt;
};

struct StepResult {
  State next_state;
  double reward = 0.0;
};

/// Sum of weight_i * power_i. Throws LengthMismatch.
double reward(std::span<const double> user_powers, std::span<const double> weights);

/// Uniform weights 1/(N*40): mean received power scaled by 1/40.
std::vector<double> scaled_reward_weights(std::size_t n_users);

State make_state(const Scenario& scenario, std::shared_ptr<const CoverageMap> map);

/// Canonical placement used before the first action: scene center, z = 70 m,
/// zero orientation.
Action canonical_action(const Scenario& scenario);

/// Deterministic initial state. The seed is accepted for interface symmetry;
/// the only environment randomness is the shadow field keyed by
/// scenario.env_seed.
State reset(const Scenario& scenario, std::uint64_t seed);

StepResult step(const State& state, const Action& action, const Scenario& scenario);

/// Rewards of n placements drawn uniformly from the raw action cube,
/// each applied to the scenario independently.
std::vector<double> random_placement_rewards(const Scenario& scenario, int n, std::uint64_t seed);

/// Continuing-task wrapper used by the trainer: raw actions in, scaled and
/// applied to a fixed scenario.
class PlacementEnv {
 public:
  using StateType = State;
  static constexpr int action_dim = kActionDim;

  explicit PlacementEnv(std::shared_ptr<const Scenario> scenario, std::uint64_t seed = 0);

  State reset() const;
  StepResult step(const State& state, std::span<const double> raw_action) const;
  const Scenario& scenario() const { return *scenario_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::shared_ptr<const Scenario> scenario_;
  std::uint64_t seed_;
};

}  // namespace celldeploy
