#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "plaid/distill.hpp"
#include "plaid/error.hpp"
#include "stub_envs.hpp"

using namespace plaid;
using plaid::testing::DriftEnv;

namespace {

constexpr std::size_t kWidth = 11;

NetworkSpec student_spec(std::size_t out = kWidth) {
  NetworkSpec s;
  s.input_width = kWidth;
  s.hidden_widths = {16, 16};
  s.output_width = out;
  return s;
}

Expert linear_expert(const std::string& id, float slope, float offset) {
  NetworkSpec vs = student_spec(1);
  return {id, GaussianPolicy(testing::elementwise_linear_net(kWidth, slope, offset), std::vector<float>(kWidth, 0.1f)),
          ValueFunction::create(vs, 3, 0.9)};
}

std::vector<std::unique_ptr<Environment>> drift_envs(std::size_t n) {
  std::vector<std::unique_ptr<Environment>> envs;
  for (std::size_t i = 0; i < n; ++i) envs.push_back(std::make_unique<DriftEnv>());
  return envs;
}

GaussianPolicy student(std::uint64_t seed, double sigma_scale = 0.1) {
  return GaussianPolicy::create(student_spec(), seed, sigma_scale);
}

}  // namespace

TEST_CASE("mixing probability anneals linearly to exactly zero") {
  CHECK(mixing_probability(0) == 1.0);
  CHECK(mixing_probability(5000) == doctest::Approx(0.5));
  CHECK(mixing_probability(10000) == 0.0);
  CHECK(mixing_probability(123456) == 0.0);
  double prev = 2.0;
  for (std::size_t u = 0; u <= 12000; u += 37) {
    const double b = mixing_probability(u);
    CHECK(b <= prev);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    prev = b;
  }
}

TEST_CASE("expert assignment") {
  ExpertAssignment a;
  a.add_expert(linear_expert("old", 1.0f, 0.0f), {"flat", "incline"});
  a.add_expert(linear_expert("new", 2.0f, 0.0f), {"steps"});
  CHECK(a.expert_for("incline").id == "old");
  CHECK(a.expert_for("steps").id == "new");
  CHECK_THROWS_AS(a.add_expert(linear_expert("third", 0.0f, 0.0f)), ConfigError);
  CHECK_THROWS_AS(a.assign("flat", 1), ConfigError);
  CHECK_THROWS_AS(a.assign("gaps", 5), ConfigError);
  CHECK_THROWS_AS(a.expert_for("gaps"), ConfigError);

  DistillCollector c({"flat", "gaps"}, drift_envs(2), 1);
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(c.collect(a, student(1), 1.0, rng, 5), ConfigError);
}

TEST_CASE("labels come from the assigned expert exactly") {
  ExpertAssignment a;
  a.add_expert(linear_expert("double", 2.0f, 0.0f), {"t0"});
  DistillCollector c({"t0"}, drift_envs(1), 4);
  Rng rng = make_rng(2);
  for (double beta : {1.0, 0.5, 0.0}) {
    for (const auto& r : c.collect(a, student(3), beta, rng, 100)) {
      for (std::size_t i = 0; i < kWidth; ++i) CHECK(r.action_label[i] == 2.0f * r.obs.state[i]);
      CHECK(r.value_label == a.expert_for("t0").value_fn.value(r.obs));
    }
  }
}

TEST_CASE("beta 1 follows the expert and beta 0 follows the student") {
  ExpertAssignment a;
  const auto expert = linear_expert("e", -0.5f, 0.1f);
  a.add_expert(expert, {"t0"});

  // Zero student sigma removes the collection noise, so trajectories are
  // plain greedy rollouts that can be replayed independently.
  for (double beta : {1.0, 0.0}) {
    const auto stud = student(5, 0.0);
    DistillCollector c({"t0"}, drift_envs(1), 9);
    Rng rng = make_rng(3);
    const auto recs = c.collect(a, stud, beta, rng, 60);
    const GaussianPolicy& actor = beta == 1.0 ? expert.policy : stud;
    DriftEnv env;
    std::size_t k = 0;
    for (std::size_t ep = 0; k < recs.size(); ++ep) {
      auto obs = env.reset(derive_seed(9, "episode", ep));
      for (std::size_t t = 0; t < env.episode_limit() && k < recs.size(); ++t, ++k) {
        CHECK(recs[k].obs.state == obs.state);
        auto act = actor.mean(obs);
        for (auto& v : act) v = std::clamp(v, -1.0f, 1.0f);
        obs = env.step(act).observation;
      }
    }
  }
}

TEST_CASE("with beta 1 the student has no influence") {
  ExpertAssignment a;
  a.add_expert(linear_expert("e", 0.7f, 0.0f), {"t0"});
  std::vector<std::vector<float>> states[2];
  for (int s = 0; s < 2; ++s) {
    DistillCollector c({"t0"}, drift_envs(1), 11);
    Rng rng = make_rng(4);
    for (const auto& r : c.collect(a, student(100 + s), 1.0, rng, 50)) states[s].push_back(r.obs.state);
  }
  CHECK(states[0] == states[1]);
}

TEST_CASE("tasks are visited round robin") {
  ExpertAssignment a;
  a.add_expert(linear_expert("old", 1.0f, 0.0f), {"a", "b"});
  a.add_expert(linear_expert("new", 2.0f, 0.0f), {"c"});
  DistillCollector c({"a", "b", "c"}, drift_envs(3), 5);
  Rng rng = make_rng(5);
  const auto recs = c.collect(a, student(1), 0.3, rng, 20 * 9);
  std::vector<std::size_t> count(3, 0);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    CHECK(recs[k].task == (k / 20) % 3);
    ++count[recs[k].task];
    const float slope = recs[k].task == 2 ? 2.0f : 1.0f;
    CHECK(recs[k].action_label[0] == slope * recs[k].obs.state[0]);
  }
  CHECK(count == std::vector<std::size_t>{60, 60, 60});
}

TEST_CASE("distill update") {
  const auto expert = linear_expert("e", 1.5f, -0.2f);
  ExpertAssignment a;
  a.add_expert(expert, {"t0"});
  DistillCollector c({"t0"}, drift_envs(1), 6);
  Rng rng = make_rng(6);
  const auto recs = c.collect(a, student(2), 1.0, rng, 64);
  std::vector<const DistillRecord*> batch;
  for (const auto& r : recs) batch.push_back(&r);

  SUBCASE("student equal to the expert: zero loss and no change") {
    auto pol = expert.policy;
    auto val = expert.value_fn;
    const auto loss = distill_update(pol, val, batch, 0.1f, 0.1f, 0.9f);
    CHECK(loss.actor_mse == 0.0);
    CHECK(loss.critic_mse == 0.0);
    CHECK(pol.net() == expert.policy.net());
    CHECK(val.net() == expert.value_fn.net());
  }
  SUBCASE("losses match a direct computation") {
    auto pol = student(7);
    auto val = ValueFunction::create(student_spec(1), 8, 0.9);
    double actor = 0.0, critic = 0.0;
    for (const auto* r : batch) {
      const auto mu = pol.mean(r->obs);
      for (std::size_t i = 0; i < kWidth; ++i) actor += std::pow(double(mu[i]) - r->action_label[i], 2);
      critic += std::pow(double(val.value(r->obs)) - r->value_label, 2);
    }
    const auto loss = distill_update(pol, val, batch, 1e-3f, 1e-3f, 0.9f);
    CHECK(loss.actor_mse == doctest::Approx(actor / (64.0 * kWidth)));
    CHECK(loss.critic_mse == doctest::Approx(critic / 64.0));
    CHECK(loss.actor_mse >= 0.0);
    CHECK(loss.critic_mse >= 0.0);
  }
  SUBCASE("actor gradient is the mean-squared-error gradient") {
    auto pol = student(7);
    auto val = ValueFunction::create(student_spec(1), 8, 0.9);
    const std::vector<const DistillRecord*> one{batch[0]};
    const auto before = pol.net();
    const auto tape = forward_tape(before, one[0]->obs.state);
    std::vector<float> g(kWidth);
    for (std::size_t i = 0; i < kWidth; ++i) g[i] = 2.0f * (tape.output[i] - one[0]->action_label[i]) / float(kWidth);
    const auto grads = backward(before, tape, g);
    distill_update(pol, val, one, 0.01f, 0.01f, 0.0f);
    const auto& w = pol.net().param("dense2.bias").values;
    const auto& w0 = before.param("dense2.bias").values;
    const auto& gb = grads[before.layout().dense_bias[2]].values;
    for (std::size_t i = 0; i < kWidth; ++i) CHECK(w[i] == doctest::Approx(w0[i] - 0.01f * gb[i]));
  }
  SUBCASE("empty batch") {
    auto pol = student(7);
    auto val = ValueFunction::create(student_spec(1), 8, 0.9);
    CHECK_THROWS_AS(distill_update(pol, val, {}, 1e-3f, 1e-3f, 0.9f), UsageError);
  }
}

TEST_CASE("distillation buffer is a bounded FIFO") {
  DistillBuffer buf(4);
  for (int i = 0; i < 10; ++i) buf.push({{{float(i)}, {}}, {}, 0.0f, 0});
  CHECK(buf.size() == 4);
  CHECK(buf[0].obs.state[0] == 6.0f);
  CHECK(buf[3].obs.state[0] == 9.0f);
}

TEST_CASE("distillation leaves experts untouched and is deterministic") {
  ExpertAssignment a;
  const auto e0 = linear_expert("old", 1.0f, 0.0f), e1 = linear_expert("new", -1.0f, 0.2f);
  a.add_expert(e0, {"a"});
  a.add_expert(e1, {"b"});
  DistillConfig cfg;
  cfg.updates = 600;
  cfg.anneal_updates = 300;
  cfg.buffer_capacity = 1000;
  cfg.curve_interval = 50;
  const auto s = student(3);
  const auto v = ValueFunction::create(student_spec(1), 4, 0.9);
  const auto r1 = distill_with_envs(a, {"a", "b"}, drift_envs(2), s, v, cfg, 12);
  const auto r2 = distill_with_envs(a, {"a", "b"}, drift_envs(2), s, v, cfg, 12);
  CHECK(r1.curve.csv() == r2.curve.csv());
  CHECK(r1.policy.net() == r2.policy.net());
  CHECK(a.experts()[0].policy.net() == e0.policy.net());
  CHECK(a.experts()[1].policy.net() == e1.policy.net());
  CHECK(a.experts()[0].value_fn.net() == e0.value_fn.net());
  CHECK(r1.curve.points.size() == 12);
  CHECK(r1.curve.points.front().beta > 0.8);
  CHECK(r1.curve.points.back().beta == 0.0);
  CHECK(r1.curve.points.back().actor_mse < r1.curve.points.front().actor_mse);
  CHECK(r1.curve.csv().rfind("update,beta,actor_mse,critic_mse\n", 0) == 0);
  const auto r3 = distill_with_envs(a, {"a", "b"}, drift_envs(2), s, v, cfg, 13);
  CHECK_FALSE(r3.policy.net() == r1.policy.net());
}

TEST_CASE("self-distillation starts at zero loss and keeps the evaluation") {
  const TaskSpec task = TaskSpec::for_kind(TerrainKind::flat, 100);
  NetworkSpec ps;
  ps.input_width = kStateDim;
  ps.hidden_widths = {16, 16};
  ps.output_width = kActionDim;
  NetworkSpec vs = ps;
  vs.output_width = 1;
  const Expert e{"e", GaussianPolicy::create(ps, 1, 0.1), ValueFunction::create(vs, 2, 0.9)};
  ExpertAssignment a;
  a.add_expert(e, {"flat"});
  DistillConfig cfg;
  cfg.updates = 200;
  cfg.anneal_updates = 100;
  cfg.curve_interval = 1;
  cfg.eval_runs = 4;
  const auto r = distill(a, {task}, e.policy, e.value_fn, cfg, EnvConfig{}, 5);
  CHECK(r.curve.points.front().actor_mse == 0.0);
  CHECK(r.curve.points.front().critic_mse == 0.0);
  const auto expert_eval = evaluate_policy(e.policy, task, EnvConfig{}, 4, cfg.eval_seed);
  REQUIRE(r.evals.size() == 1);
  CHECK(r.evals[0].mean == doctest::Approx(expert_eval.mean).epsilon(0.02));
}

TEST_CASE("blind student on a terrain-feature task is a shape error") {
  NetworkSpec ps;
  ps.input_width = kStateDim;
  ps.hidden_widths = {8};
  ps.output_width = kActionDim;
  NetworkSpec vs = ps;
  vs.output_width = 1;
  const Expert e{"e", GaussianPolicy::create(ps, 1, 0.1), ValueFunction::create(vs, 2, 0.9)};
  ExpertAssignment a;
  a.add_expert(e, {"steps"});
  DistillConfig cfg;
  cfg.updates = 10;
  CHECK_THROWS_AS(distill(a, {TaskSpec::for_kind(TerrainKind::steps, 50)}, e.policy, e.value_fn, cfg, EnvConfig{}, 1),
                  ShapeError);
}

TEST_CASE("two linear experts on disjoint halves") {
  // Expert L drives s < 0, expert R drives s >= 0; one student must fit both.
  NetworkSpec vs;
  vs.input_width = kStateDim;
  vs.hidden_widths = {8};
  vs.output_width = 1;
  const float sl = 1.0f, ol = 0.3f, sr = -0.8f, or_ = 0.3f;
  ExpertAssignment a;
  a.add_expert({"L", GaussianPolicy(testing::context_linear_net(kStateDim, kActionDim, sl, ol), std::vector<float>(kActionDim, 0.1f)),
                ValueFunction::create(vs, 1, 0.9)},
               {"left"});
  a.add_expert({"R", GaussianPolicy(testing::context_linear_net(kStateDim, kActionDim, sr, or_), std::vector<float>(kActionDim, 0.1f)),
                ValueFunction::create(vs, 2, 0.9)},
               {"right"});
  std::vector<std::unique_ptr<Environment>> envs;
  envs.push_back(std::make_unique<testing::BanditEnv>(testing::linear_target(sl, ol), -1.0f, 0.0f));
  envs.push_back(std::make_unique<testing::BanditEnv>(testing::linear_target(sr, or_), 0.0f, 1.0f));

  NetworkSpec ps = vs;
  ps.hidden_widths = {32, 32};
  ps.output_width = kActionDim;
  vs.hidden_widths = {32, 32};
  DistillConfig cfg;
  cfg.updates = 10000;
  const auto r = distill_with_envs(a, {"left", "right"}, std::move(envs), GaussianPolicy::create(ps, 3, 0.1),
                                   ValueFunction::create(vs, 4, 0.9), cfg, 8);

  auto half_mse = [&](float lo, float hi, float slope, float offset) {
    double err = 0.0;
    int n = 0;
    for (int k = 0; k <= 100; ++k) {
      Observation o{std::vector<float>(kStateDim, 0.0f), {}};
      o.state[0] = lo + (hi - lo) * float(k) / 100.0f;
      o.state[1] = 1.0f;
      const auto mu = r.policy.mean(o);
      for (float m : mu) err += std::pow(double(m) - (slope * o.state[0] + offset), 2);
      n += int(mu.size());
    }
    return err / n;
  };
  const double left = half_mse(-1.0f, 0.0f, sl, ol), right = half_mse(0.0f, 1.0f, sr, or_);
  MESSAGE("student mse left ", left, " right ", right);
  CHECK(left <= 0.01);
  CHECK(right <= 0.01);
}
