#include <doctest.h>

#include <cmath>

#include "celldeploy/ddpg.hpp"
#include "celldeploy/errors.hpp"
#include "celldeploy/nn/ops.hpp"

using namespace celldeploy;

namespace {

using ToyAgent = Ddpg<ToyModel>;
using ToyBatch = ToyAgent::Batch;

double linf_distance(const nn::ParamList<float>& a, const nn::ParamList<float>& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[static_cast<int>(k)].value.size(); ++i)
      d = std::max(d, std::abs(double(a[static_cast<int>(k)].value[i]) - double(b[static_cast<int>(k)].value[i])));
  return d;
}

std::vector<Transition<ToyEnv::State>> toy_transitions(int n, Rng& rng) {
  std::vector<Transition<ToyEnv::State>> out;
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform(-1, 1);
    out.push_back({{}, {a}, -(a - 0.3) * (a - 0.3), {}});
  }
  return out;
}

ToyBatch as_batch(const std::vector<Transition<ToyEnv::State>>& ts) {
  ToyBatch b;
  for (const auto& t : ts) b.push_back(&t);
  return b;
}

double toy_q(const ToyModel& model, const nn::ParamList<float>& critic, double action) {
  nn::Tape<float> tape(false);
  nn::Binder<float> bind(tape, critic);
  const ToyEnv::State s;
  const ToyEnv::State* p = &s;
  const auto a = tape.constant(nn::Tensor<float>({1, 1}, {static_cast<float>(action)}));
  return tape.value(model.critic(bind, std::span<const ToyEnv::State* const>(&p, 1), a))[0];
}

}  // namespace

TEST_CASE("OU noise follows the Euler recurrence") {
  const OUParams p;
  Rng a(5), b(5);
  double x = 0.3;
  const double next = ou_next(x, p, a);
  CHECK(next == doctest::Approx(x + 0.15 * (0 - x) + 0.2 * b.normal()).epsilon(1e-15));

  OUNoise noise(3, p, 9);
  CHECK(noise.value() == std::vector<double>(3, 0.0));
  const auto first = noise.next();
  OUNoise again(3, p, 9);
  CHECK(again.next() == first);
  CHECK(first[0] != first[1]);

  OUParams bad;
  bad.theta = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("OU stationary statistics") {
  const OUParams p;
  Rng rng(1);
  double x = 0, sum = 0, sq = 0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    x = ou_next(x, p, rng);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double predicted = p.sigma * p.sigma * p.dt / (1 - (1 - p.theta * p.dt) * (1 - p.theta * p.dt));
  CHECK(std::abs(mean - p.mu) < 0.01);
  CHECK(std::abs(var - predicted) / predicted < 0.1);
}

TEST_CASE("perturbed actions are clamped") {
  const std::vector<double> raw{0.9, -0.5, 0.0};
  const std::vector<double> noise{0.5, -0.7, 0.25};
  CHECK(perturb_action(raw, noise) == std::vector<double>{1.0, -1.0, 0.25});
  CHECK_THROWS_AS(perturb_action(raw, std::vector<double>{1.0}), LengthMismatch);
}

TEST_CASE("replay buffer evicts the oldest item") {
  ReplayBuffer<int> buf(5);
  for (int k = 1; k <= 12; ++k) buf.push(k);
  CHECK(buf.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(buf[i] == static_cast<int>(12 - 5 + 1 + i));
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(6, rng), ValidationError);
  const auto s = buf.sample(5, rng);
  std::vector<int> got;
  for (const int* p : s) got.push_back(*p);
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<int>{8, 9, 10, 11, 12});  // without replacement
  CHECK_THROWS_AS(ReplayBuffer<int>(0), ValidationError);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer<int> buf(10);
  for (int k = 0; k < 10; ++k) buf.push(k);
  Rng rng(2);
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(*buf.sample(1, rng).front())];
  double chi2 = 0;
  for (int c : counts) {
    CHECK(std::abs(c / double(draws) - 0.1) < 0.03);
    chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  }
  CHECK(chi2 < 27.9);  // chi-square, 9 dof, p = 0.001
}

TEST_CASE("soft update contracts toward the source") {
  auto agent = make_toy_agent(1, TrainConfig{});
  nn::ParamList<float> target = agent.actor();
  for (auto& p : target)
    for (float& v : p.value.values()) v += 0.5f;
  const double before = linf_distance(target, agent.actor());
  soft_update(target, agent.actor(), 0.1);
  CHECK(linf_distance(target, agent.actor()) <= 0.9 * before + 1e-6);
  soft_update(target, agent.actor(), 1.0);
  CHECK(target == agent.actor());
  nn::ParamList<float> other;
  other.add("x", {3});
  CHECK_THROWS_AS(soft_update(other, agent.actor(), 0.5), ShapeError);
}

TEST_CASE("target values use the target networks") {
  TrainConfig cfg;
  auto agent = make_toy_agent(2, cfg);
  // Make the online and target critics differ.
  for (auto& p : agent.mutable_critic())
    for (float& v : p.value.values()) v *= 2.0f;
  Rng rng(3);
  const auto ts = toy_transitions(4, rng);
  const auto y = agent.compute_target_y(as_batch(ts), 0.9);
  const double a_next = [&] {
    nn::Tape<float> tape(false);
    nn::Binder<float> bind(tape, agent.target_actor());
    const ToyEnv::State s;
    const ToyEnv::State* p = &s;
    return double(tape.value(agent.model().actor(bind, std::span<const ToyEnv::State* const>(&p, 1)))[0]);
  }();
  const double q_next = toy_q(agent.model(), agent.target_critic(), a_next);
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK(y[i] == doctest::Approx(ts[i].reward + 0.9 * q_next).epsilon(1e-6));
  CHECK_THROWS_AS(agent.compute_target_y({}, 0.9), ValidationError);
}

TEST_CASE("critic update returns the pre-step loss and lowers it") {
  auto agent = make_toy_agent(4, TrainConfig{});
  Rng rng(4);
  const auto ts = toy_transitions(8, rng);
  const auto batch = as_batch(ts);
  const std::vector<double> y(8, -0.25);
  double expected = 0;
  for (const auto& t : ts) {
    const double d = toy_q(agent.model(), agent.critic(), t.action[0]) - y[0];
    expected += d * d / 8;
  }
  const nn::ParamList<float> actor0 = agent.actor(), ta0 = agent.target_actor(), tc0 = agent.target_critic();
  const double first = agent.critic_update(batch, y);
  CHECK(first == doctest::Approx(expected).epsilon(1e-5));
  double last = first;
  for (int i = 0; i < 50; ++i) last = agent.critic_update(batch, y);
  CHECK(last < first);
  CHECK(agent.actor() == actor0);
  CHECK(agent.target_actor() == ta0);
  CHECK(agent.target_critic() == tc0);
}

TEST_CASE("actor update touches only the actor") {
  auto agent = make_toy_agent(5, TrainConfig{});
  Rng rng(5);
  const auto ts = toy_transitions(8, rng);
  const nn::ParamList<float> actor0 = agent.actor(), critic0 = agent.critic(), ta0 = agent.target_actor(),
                             tc0 = agent.target_critic();
  const double q0 = agent.actor_update(as_batch(ts));
  CHECK(std::isfinite(q0));
  CHECK_FALSE(agent.actor() == actor0);
  CHECK(agent.critic() == critic0);
  CHECK(agent.target_actor() == ta0);
  CHECK(agent.target_critic() == tc0);
  // Ascending Q: the objective increases over repeated steps at a fixed critic.
  double q = q0;
  for (int i = 0; i < 30; ++i) q = agent.actor_update(as_batch(ts));
  CHECK(q > q0);
}

TEST_CASE("evaluation freezes parameters and repeats one action") {
  TrainConfig cfg;
  cfg.total_steps = 60;
  cfg.eval_every = 20;
  cfg.eval_steps = 5;
  const ToyEnv env{0.2};
  auto agent = make_toy_agent(6, cfg);
  int evals = 0;
  TrainHooks<ToyModel> hooks;
  hooks.on_eval = [&](const EvalWindow& w, const ToyAgent&) {
    ++evals;
    CHECK(w.params_frozen);
    CHECK(w.actions.size() == 5);
    for (const auto& a : w.actions) CHECK(a == w.actions.front());
  };
  const RunArtifacts art = train_run(env, agent, cfg, 6, hooks);
  CHECK(evals == 3);
  CHECK(art.train_rewards.size() == 60);
  CHECK(art.first_update_step == 8);
  CHECK(art.critic_losses.size() == 53);
  CHECK(art.evals[2].step == 60);
}

TEST_CASE("training is deterministic per seed") {
  TrainConfig cfg;
  cfg.total_steps = 100;
  cfg.eval_every = 50;
  const ToyEnv env{-0.4};
  auto a = make_toy_agent(3, cfg);
  auto b = make_toy_agent(3, cfg);
  const auto ra = train_run(env, a, cfg, 3);
  // Shift the heap so the second run sees different addresses.
  std::vector<std::vector<char>> ballast;
  for (int i = 1; i < 50; ++i) ballast.emplace_back(static_cast<std::size_t>(i * 37));
  const auto rb = train_run(env, b, cfg, 3);
  CHECK(ra.train_rewards == rb.train_rewards);
  CHECK(a.actor() == b.actor());
  auto c = make_toy_agent(3, cfg);
  CHECK(train_run(env, c, cfg, 4).train_rewards != ra.train_rewards);
}

TEST_CASE("non-finite losses abort the run") {
  TrainConfig cfg;
  cfg.total_steps = 20;
  cfg.eval_every = 10;
  const ToyEnv env{0.0};
  auto agent = make_toy_agent(7, cfg);
  for (auto& p : agent.mutable_critic())
    for (float& v : p.value.values()) v = 1e30f;
  int aborted_at = 0;
  TrainHooks<ToyModel> hooks;
  hooks.on_abort = [&](int step, const ToyAgent&, const char*) { aborted_at = step; };
  CHECK_THROWS_AS(train_run(env, agent, cfg, 7, hooks), NonFiniteLoss);
  CHECK(aborted_at == 8);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.gamma = -0.1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("toy problem converges to the hidden optimum") {
  TrainConfig cfg;
  cfg.gamma = 0.0;
  const double u = 0.35;
  const ToyEnv env{u};
  auto agent = make_toy_agent(1, cfg);
  const RunArtifacts art = train_run(env, agent, cfg, 1);
  CHECK(std::abs(art.evals.back().actions.front()[0] - u) < 0.05);
}
