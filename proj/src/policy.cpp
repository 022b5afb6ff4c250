#include "plaid/policy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>

#include <spdlog/spdlog.h>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"

namespace plaid {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma must lie in [0, 1)");
  if (!(actor_lr > 0.0f) || !(critic_lr > 0.0f)) throw ConfigError("train learning rates must be > 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (buffer_capacity < batch) throw ConfigError("train.buffer_capacity must be >= train.batch");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("train epsilon bounds must lie in [0, 1]");
  }
  if (eval_interval < 1) throw ConfigError("train.eval_interval must be >= 1");
  if (eval_runs < 1) throw ConfigError("train.eval_runs must be >= 1");
  if (!(sigma_scale >= 0.0)) throw ConfigError("train.sigma_scale must be >= 0");
  if (workers < 1 || worker_chunk < 1) throw ConfigError("train.workers and worker_chunk must be >= 1");
}

GaussianPolicy::GaussianPolicy(Network mean_net, std::vector<float> sigma)
    : net_(std::move(mean_net)), sigma_(std::move(sigma)) {
  if (sigma_.size() != net_.spec().output_width) {
    throw ShapeError("policy sigma has " + std::to_string(sigma_.size()) + " entries for " +
                     std::to_string(net_.spec().output_width) + " actions");
  }
  for (float s : sigma_) {
    if (!(s >= 0.0f)) throw ConfigError("policy sigma must be non-negative");
  }
}

GaussianPolicy GaussianPolicy::create(const NetworkSpec& spec, std::uint64_t seed, double sigma_scale,
                                      double action_bound) {
  GaussianPolicy p(init_network(spec, seed),
                   std::vector<float>(spec.output_width, float(sigma_scale * action_bound)));
  p.action_bound_ = action_bound;
  return p;
}

std::span<const float> window_input(const Network& net, const Observation& obs) {
  if (!net.has_terrain_branch()) return {};
  return obs.window;
}

std::vector<float> GaussianPolicy::mean(const Observation& obs) const {
  return forward(net_, obs.state, window_input(net_, obs));
}

ValueFunction::ValueFunction(Network value_net, float scale) : net_(std::move(value_net)), scale_(scale) {
  if (net_.spec().output_width != 1) throw ShapeError("value network must have exactly one output");
  if (!(scale_ > 0.0f)) throw ConfigError("value scale must be positive");
}

ValueFunction ValueFunction::create(const NetworkSpec& spec, std::uint64_t seed, double gamma) {
  return ValueFunction(init_network(spec, seed), float(1.0 / (1.0 - gamma)));
}

float ValueFunction::value(const Observation& obs) const {
  return scale_ * forward(net_, obs.state, window_input(net_, obs))[0];
}

void check_task_compatible(const Network& net, const TaskSpec& task) {
  if (net.spec().input_width != kStateDim) {
    throw ShapeError("network input width " + std::to_string(net.spec().input_width) + " does not match the " +
                     std::to_string(kStateDim) + "-entry character state");
  }
  if (task.requires_terrain_features && !net.has_terrain_branch()) {
    throw ShapeError("task " + task.name +
                     " requires terrain features but the network has no terrain branch (inject it first)");
  }
}

SampledAction sample_action(const GaussianPolicy& policy, const Observation& obs, double epsilon, Rng& rng) {
  SampledAction out;
  out.action = policy.mean(obs);
  out.exploratory = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon;
  if (out.exploratory) {
    const auto& sigma = policy.sigma();
    for (std::size_t i = 0; i < out.action.size(); ++i) {
      out.action[i] += sigma[i] * float(standard_normal(rng));
    }
  }
  const float bound = float(policy.action_bound());
  for (auto& a : out.action) a = std::clamp(a, -bound, bound);
  return out;
}

double epsilon_schedule(std::size_t iter, const TrainConfig& cfg) {
  if (cfg.epsilon_anneal_iters == 0 || iter >= cfg.epsilon_anneal_iters) return cfg.epsilon_end;
  const double frac = double(iter) / double(cfg.epsilon_anneal_iters);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

double td_error(double r, double v_next, double v_curr, double gamma, bool done) {
  return r + gamma * v_next * (done ? 0.0 : 1.0) - v_curr;
}

int ptd_advantage(double delta) { return delta > 0.0 ? 1 : 0; }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw UsageError("cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

std::vector<double> td_errors(const ValueFunction& value_fn, std::span<const Transition* const> batch,
                              double gamma) {
  std::vector<double> deltas;
  deltas.reserve(batch.size());
  for (const auto* t : batch) {
    const double v_next = t->done ? 0.0 : value_fn.value(t->next);
    deltas.push_back(td_error(t->reward, v_next, value_fn.value(t->obs), gamma, t->done));
  }
  return deltas;
}

double critic_update(ValueFunction& value_fn, std::span<const Transition* const> batch, double gamma,
                     float lr, float momentum) {
  if (batch.empty()) throw UsageError("critic_update needs a non-empty batch");
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto* t : batch) {
    const double v_next = t->done ? 0.0 : value_fn.value(t->next);
    targets.push_back(t->reward + gamma * v_next);
  }
  Network& net = value_fn.net();
  const float scale = value_fn.scale();
  ParamSet grads = net.zero_gradients();
  const float inv_batch = 1.0f / float(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tape tape = forward_tape(net, batch[i]->obs.state, window_input(net, batch[i]->obs));
    const double err = targets[i] - double(scale) * tape.output[0];
    loss += 0.5 * err * err;
    const float g = float(-err / scale) * inv_batch;
    backward(net, tape, std::span<const float>(&g, 1), grads);
  }
  sgd_momentum_step(net, grads, lr, momentum);
  return loss / double(batch.size());
}

ActorStats actor_update(GaussianPolicy& policy, std::span<const Transition* const> batch,
                        std::span<const double> deltas, float lr, float momentum, bool update_on_greedy) {
  if (deltas.size() != batch.size()) throw ShapeError("one TD error per transition required");
  ActorStats stats;
  std::vector<std::size_t> chosen;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (ptd_advantage(deltas[i]) == 0) continue;
    ++positive;
    if (update_on_greedy || batch[i]->exploratory) chosen.push_back(i);
  }
  if (!batch.empty()) stats.fraction_positive = double(positive) / double(batch.size());
  if (chosen.empty()) return stats;

  Network& net = policy.net();
  ParamSet grads = net.zero_gradients();
  const float inv = 1.0f / float(chosen.size());
  std::vector<float> g(net.spec().output_width);
  for (auto i : chosen) {
    const auto* t = batch[i];
    const Tape tape = forward_tape(net, t->obs.state, window_input(net, t->obs));
    double sq = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const float diff = tape.output[k] - t->action[k];
      sq += double(diff) * diff;
      g[k] = diff * inv;
    }
    stats.loss += 0.5 * sq;
    backward(net, tape, g, grads);
  }
  stats.loss /= double(chosen.size());
  sgd_momentum_step(net, grads, lr, momentum);
  return stats;
}

std::string LearningCurve::csv() const {
  CsvWriter out{"iteration", "sim_steps", "mean_reward", "std_reward", "epsilon"};
  for (const auto& p : points) {
    out.cell(p.iteration).cell(p.sim_steps).cell(p.mean_reward).cell(p.std_reward).cell(p.epsilon).end_row();
  }
  return out.str();
}

EvalReport evaluate_policy(const GaussianPolicy& policy, const TaskSpec& task, const EnvConfig& env,
                           std::size_t n_runs, std::uint64_t base_seed) {
  check_task_compatible(policy.net(), task);
  BipedEnv e(task, env);
  const float bound = float(policy.action_bound());
  const ActionFn act = [&](const Observation& obs) {
    auto a = policy.mean(obs);
    for (auto& v : a) v = std::clamp(v, -bound, bound);
    return a;
  };
  return evaluate(act, e, task.name, n_runs, base_seed);
}

std::vector<EvalReport> evaluate_policy(const GaussianPolicy& policy, const std::vector<TaskSpec>& tasks,
                                        const EnvConfig& env, std::size_t n_runs, std::uint64_t base_seed) {
  std::vector<EvalReport> out;
  for (const auto& task : tasks) out.push_back(evaluate_policy(policy, task, env, n_runs, base_seed));
  return out;
}

namespace {

struct Worker {
  std::vector<std::unique_ptr<Environment>> envs;  // one per task
  Rng rng;
  Observation obs;
  std::size_t task = 0;
  std::size_t episodes = 0;
  bool needs_reset = true;
};

CurvePoint make_point(const GaussianPolicy& policy, const std::vector<std::string>& names,
                      std::vector<std::unique_ptr<Environment>>& eval_envs, const TrainConfig& cfg,
                      std::size_t iteration) {
  CurvePoint p;
  p.iteration = iteration;
  p.sim_steps = iteration;
  p.epsilon = epsilon_schedule(iteration, cfg);
  const float bound = float(policy.action_bound());
  const ActionFn act = [&](const Observation& obs) {
    auto a = policy.mean(obs);
    for (auto& v : a) v = std::clamp(v, -bound, bound);
    return a;
  };
  EvalReport pooled;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto r = evaluate(act, *eval_envs[i], names[i], cfg.eval_runs, cfg.eval_seed);
    pooled.episode_rewards.insert(pooled.episode_rewards.end(), r.episode_rewards.begin(), r.episode_rewards.end());
  }
  pooled.summarize();
  p.mean_reward = pooled.mean;
  p.std_reward = pooled.std;
  return p;
}

/// Advances one worker by one environment step and returns the transition.
Transition collect_step(const GaussianPolicy& policy, Worker& w, std::size_t worker_index, std::size_t n_workers,
                        std::size_t n_tasks, double epsilon, std::uint64_t seed) {
  if (w.needs_reset) {
    const std::size_t global_episode = w.episodes * n_workers + worker_index;
    w.task = round_robin_task(global_episode, n_tasks);
    w.obs = w.envs[w.task]->reset(derive_seed(seed, "episode", global_episode));
    ++w.episodes;
    w.needs_reset = false;
  }
  SampledAction sa = sample_action(policy, w.obs, epsilon, w.rng);
  StepOutcome out = w.envs[w.task]->step(sa.action);
  Transition t{std::move(w.obs), std::move(sa.action), float(out.reward), out.observation, out.terminal,
               sa.exploratory};
  w.obs = std::move(out.observation);
  w.needs_reset = out.done();
  return t;
}

}  // namespace

TrainResult train_with_envs(GaussianPolicy policy, ValueFunction value_fn, const std::vector<std::string>& names,
                            const std::vector<std::unique_ptr<Environment>>& envs, const TrainConfig& cfg,
                            std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  if (envs.empty() || names.size() != envs.size()) throw ConfigError("training needs one environment per task");
  TrainResult result{std::move(policy), std::move(value_fn), {}};
  if (cfg.max_iters == 0) return result;

  std::vector<Worker> workers(cfg.workers);
  for (std::size_t w = 0; w < workers.size(); ++w) {
    for (const auto& env : envs) workers[w].envs.push_back(env->clone());
    workers[w].rng = make_rng(derive_seed(seed, "actions", w));
  }
  std::vector<std::unique_ptr<Environment>> eval_envs;
  for (const auto& env : envs) eval_envs.push_back(env->clone());
  ReplayBuffer buffer(cfg.buffer_capacity);
  Rng learner_rng = make_rng(derive_seed(seed, "minibatch"));
  const std::size_t n_tasks = envs.size();

  std::size_t iter = 0;
  auto learn = [&](Transition t) {
    buffer.push(std::move(t));
    if (buffer.size() >= cfg.batch) {
      const auto batch = buffer.sample(cfg.batch, learner_rng);
      const auto deltas = td_errors(result.value_fn, batch, cfg.gamma);
      critic_update(result.value_fn, batch, cfg.gamma, cfg.critic_lr, cfg.momentum);
      actor_update(result.policy, batch, deltas, cfg.actor_lr, cfg.momentum, cfg.update_on_greedy);
    }
    ++iter;
    if (iter % cfg.eval_interval == 0 || iter == cfg.max_iters) {
      result.curve.points.push_back(make_point(result.policy, names, eval_envs, cfg, iter));
      if (progress) progress(result.curve.points.back());
      spdlog::debug("iteration {} mean reward {:.4f}", iter, result.curve.points.back().mean_reward);
    }
  };

  if (cfg.workers == 1) {
    while (iter < cfg.max_iters) {
      learn(collect_step(result.policy, workers[0], 0, 1, n_tasks, epsilon_schedule(iter, cfg), seed));
    }
    return result;
  }

  // Rollouts on a read-only snapshot, one thread per worker; updates are serial.
  while (iter < cfg.max_iters) {
    const std::size_t per_worker =
        std::min(cfg.worker_chunk, (cfg.max_iters - iter + cfg.workers - 1) / cfg.workers);
    const GaussianPolicy snapshot = result.policy;
    const std::size_t base_iter = iter;
    std::vector<std::vector<Transition>> collected(cfg.workers);
    {
      std::vector<std::jthread> threads;
      for (std::size_t w = 0; w < cfg.workers; ++w) {
        threads.emplace_back([&, w] {
          for (std::size_t k = 0; k < per_worker; ++k) {
            const double eps = epsilon_schedule(base_iter + k * cfg.workers + w, cfg);
            collected[w].push_back(collect_step(snapshot, workers[w], w, cfg.workers, n_tasks, eps, seed));
          }
        });
      }
    }
    for (std::size_t k = 0; k < per_worker; ++k) {
      for (std::size_t w = 0; w < cfg.workers && iter < cfg.max_iters; ++w) learn(std::move(collected[w][k]));
    }
  }
  return result;
}

TrainResult train_multitask(GaussianPolicy policy, ValueFunction value_fn, const std::vector<TaskSpec>& tasks,
                            const TrainConfig& cfg, const EnvConfig& env, std::uint64_t seed,
                            const ProgressFn& progress) {
  if (tasks.empty()) throw ConfigError("training needs at least one task");
  std::vector<std::string> names;
  std::vector<std::unique_ptr<Environment>> envs;
  for (const auto& task : tasks) {
    check_task_compatible(policy.net(), task);
    check_task_compatible(value_fn.net(), task);
    names.push_back(task.name);
    envs.push_back(std::make_unique<BipedEnv>(task, env));
  }
  return train_with_envs(std::move(policy), std::move(value_fn), names, envs, cfg, seed, progress);
}

TrainResult train_task(GaussianPolicy policy, ValueFunction value_fn, const TaskSpec& task,
                       const TrainConfig& cfg, const EnvConfig& env, std::uint64_t seed,
                       const ProgressFn& progress) {
  return train_multitask(std::move(policy), std::move(value_fn), std::vector<TaskSpec>{task}, cfg, env, seed,
                         progress);
}

}  // namespace plaid
