#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plaid/biped.hpp"
#include "plaid/evaluate.hpp"
#include "plaid/nn.hpp"
#include "plaid/rng.hpp"

namespace plaid {

struct TrainConfig {
  double gamma = 0.99;
  float actor_lr = 1e-4f;
  float critic_lr = 1e-3f;
  float momentum = 0.9f;
  std::size_t batch = 32;
  std::size_t buffer_capacity = 4096;
  double epsilon_start = 0.2;
  double epsilon_end = 0.1;
  std::size_t epsilon_anneal_iters = 100000;
  std::size_t max_iters = 0;
  std::size_t eval_interval = 5000;
  std::size_t eval_runs = 16;
  std::uint64_t eval_seed = 7;
  /// Greedy (mean) actions stay in the buffer and are eligible for actor updates.
  bool update_on_greedy = true;
  /// Exploration std as a fraction of each action dimension's half-range.
  double sigma_scale = 0.1;
  std::size_t workers = 1;
  /// Steps each worker collects between policy snapshot refreshes (workers > 1).
  std::size_t worker_chunk = 32;

  void validate() const;
};

class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Network mean_net, std::vector<float> sigma);

  /// Fresh policy with sigma = sigma_scale * action_bound on every dimension.
  static GaussianPolicy create(const NetworkSpec& spec, std::uint64_t seed, double sigma_scale,
                               double action_bound = 1.0);

  std::vector<float> mean(const Observation& obs) const;
  const Network& net() const { return net_; }
  Network& net() { return net_; }
  const std::vector<float>& sigma() const { return sigma_; }
  double action_bound() const { return action_bound_; }
  void set_action_bound(double bound) { action_bound_ = bound; }

 private:
  Network net_;
  std::vector<float> sigma_;
  double action_bound_ = 1.0;
};

/// V(s) = scale * net(s). With scale = 1 / (1 - gamma) the network regresses
/// values normalised to the per-step reward range.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(Network value_net, float scale);

  static ValueFunction create(const NetworkSpec& spec, std::uint64_t seed, double gamma);

  float value(const Observation& obs) const;
  const Network& net() const { return net_; }
  Network& net() { return net_; }
  float scale() const { return scale_; }

 private:
  Network net_;
  float scale_ = 1.0f;
};

/// Network inputs for an observation; the window is dropped for blind networks.
std::span<const float> window_input(const Network& net, const Observation& obs);

/// Throws ShapeError when a network cannot consume the task's observations.
void check_task_compatible(const Network& net, const TaskSpec& task);

struct Transition {
  Observation obs;
  std::vector<float> action;
  float reward = 0.0f;
  Observation next;
  bool done = false;  // terminal: V(next) is not bootstrapped
  bool exploratory = false;
};

struct SampledAction {
  std::vector<float> action;
  bool exploratory = false;
};

/// With probability epsilon: mu + sigma * z (exploratory); else mu. Clamped to bounds.
SampledAction sample_action(const GaussianPolicy& policy, const Observation& obs, double epsilon, Rng& rng);

/// Linear anneal from epsilon_start to epsilon_end over epsilon_anneal_iters, then constant.
double epsilon_schedule(std::size_t iter, const TrainConfig& cfg);

/// r + gamma * v_next * (done ? 0 : 1) - v_curr
double td_error(double r, double v_next, double v_curr, double gamma, bool done);

/// Positive temporal difference indicator: 1 iff delta > 0.
int ptd_advantage(double delta);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

std::vector<double> td_errors(const ValueFunction& value_fn, std::span<const Transition* const> batch,
                              double gamma);

/// One SGD-momentum step on mean 1/2 (y - V(s))^2 with targets from the
/// pre-update network. Returns the batch mean loss (in value units).
double critic_update(ValueFunction& value_fn, std::span<const Transition* const> batch, double gamma,
                     float lr, float momentum);

struct ActorStats {
  double loss = 0.0;               // mean 1/2 |a - mu|^2 over positive transitions
  double fraction_positive = 0.0;  // of the batch
};

/// Regresses mu(s) toward the executed action on transitions with positive TD
/// error; other transitions contribute nothing. Sigma is never touched.
ActorStats actor_update(GaussianPolicy& policy, std::span<const Transition* const> batch,
                        std::span<const double> deltas, float lr, float momentum,
                        bool update_on_greedy = true);

struct CurvePoint {
  std::size_t iteration = 0;
  std::size_t sim_steps = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double epsilon = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  std::string csv() const;  // iteration,sim_steps,mean_reward,std_reward,epsilon
};

struct TrainResult {
  GaussianPolicy policy;
  ValueFunction value_fn;
  LearningCurve curve;
};

/// Evaluates the policy's mean actions on each task with shared seeds.
std::vector<EvalReport> evaluate_policy(const GaussianPolicy& policy, const std::vector<TaskSpec>& tasks,
                                        const EnvConfig& env, std::size_t n_runs, std::uint64_t base_seed);
EvalReport evaluate_policy(const GaussianPolicy& policy, const TaskSpec& task, const EnvConfig& env,
                           std::size_t n_runs, std::uint64_t base_seed);

/// Called after every evaluation point; used for progress logging.
using ProgressFn = std::function<void(const CurvePoint&)>;

/// Actor-critic training with PTD advantages on one task.
TrainResult train_task(GaussianPolicy policy, ValueFunction value_fn, const TaskSpec& task,
                       const TrainConfig& cfg, const EnvConfig& env, std::uint64_t seed,
                       const ProgressFn& progress = {});

/// Same loop with episodes assigned round-robin over `tasks`; with a single
/// task this is exactly train_task.
TrainResult train_multitask(GaussianPolicy policy, ValueFunction value_fn, const std::vector<TaskSpec>& tasks,
                            const TrainConfig& cfg, const EnvConfig& env, std::uint64_t seed,
                            const ProgressFn& progress = {});

/// Training loop over arbitrary environments (one per task); each worker and
/// the evaluator use clones of `envs`.
TrainResult train_with_envs(GaussianPolicy policy, ValueFunction value_fn, const std::vector<std::string>& names,
                            const std::vector<std::unique_ptr<Environment>>& envs, const TrainConfig& cfg,
                            std::uint64_t seed, const ProgressFn& progress = {});

/// Task index of the k-th episode under round-robin scheduling.
inline std::size_t round_robin_task(std::size_t episode, std::size_t n_tasks) { return episode % n_tasks; }

}  // namespace plaid
