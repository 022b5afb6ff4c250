#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "plaid/biped.hpp"
#include "plaid/evaluate.hpp"
#include "plaid/policy.hpp"

namespace plaid {

struct Expert {
  std::string id;
  GaussianPolicy policy;
  ValueFunction value_fn;
};

/// Experts and the task -> expert map used to label distillation data.
class ExpertAssignment {
 public:
  /// PLAID never holds more than two experts; terminal distillations raise the limit.
  explicit ExpertAssignment(std::size_t max_experts = 2) : max_experts_(max_experts) {}

  /// Returns the expert's index. Throws ConfigError past the limit.
  std::size_t add_expert(Expert expert);
  /// Throws ConfigError for an unknown expert index or a task assigned twice.
  void assign(const std::string& task, std::size_t expert);
  std::size_t add_expert(Expert expert, const std::vector<std::string>& tasks);

  /// Throws ConfigError when the task has no expert.
  const Expert& expert_for(const std::string& task) const;
  std::size_t expert_index(const std::string& task) const;

  const std::vector<Expert>& experts() const { return experts_; }
  const std::map<std::string, std::size_t>& tasks() const { return task_to_expert_; }
  std::size_t max_experts() const { return max_experts_; }

 private:
  std::size_t max_experts_;
  std::vector<Expert> experts_;
  std::map<std::string, std::size_t> task_to_expert_;
};

struct DistillRecord {
  Observation obs;
  std::vector<float> action_label;  // expert mean action
  float value_label = 0.0f;         // expert value estimate
  std::size_t task = 0;             // index into the collector's task list
};

class DistillBuffer {
 public:
  explicit DistillBuffer(std::size_t capacity);
  void push(DistillRecord r);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const DistillRecord& operator[](std::size_t i) const { return items_[i]; }
  std::vector<const DistillRecord*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<DistillRecord> items_;
};

struct DistillConfig {
  std::size_t updates = 50000;
  std::size_t anneal_updates = 10000;
  std::size_t batch = 32;
  std::size_t buffer_capacity = 50000;
  std::size_t steps_per_update = 1;
  float actor_lr = 1e-3f;
  float critic_lr = 1e-3f;
  float momentum = 0.9f;
  /// Loss curve rows average this many updates.
  std::size_t curve_interval = 100;
  std::size_t eval_runs = 16;
  std::uint64_t eval_seed = 7;

  void validate() const;
};

/// 1 at update 0, linear to exactly 0 at `anneal_updates`, 0 afterwards.
double mixing_probability(std::size_t update_count, std::size_t anneal_updates = 10000);

/// Runs round-robin episodes over a task list and records expert-labelled states.
class DistillCollector {
 public:
  /// `envs[i]` runs `task_names[i]`.
  DistillCollector(std::vector<std::string> task_names, std::vector<std::unique_ptr<Environment>> envs,
                   std::uint64_t seed);

  /// Per step: the task's expert acts with probability beta, else the student.
  /// Noise with std beta * student sigma is added to the executed action.
  /// Labels always come from the assigned expert's mean action and value.
  std::vector<DistillRecord> collect(const ExpertAssignment& assignment, const GaussianPolicy& student,
                                     double beta, Rng& rng, std::size_t n);

  const std::vector<std::string>& task_names() const { return task_names_; }

 private:
  std::vector<std::string> task_names_;
  std::vector<std::unique_ptr<Environment>> envs_;
  std::uint64_t seed_;
  Observation obs_;
  std::size_t task_ = 0;
  std::size_t episodes_ = 0;
  bool needs_reset_ = true;
};

struct DistillLoss {
  double actor_mse = 0.0;   // mean over batch and action dimensions
  double critic_mse = 0.0;  // in value units
};

/// One SGD-momentum step on each of the actor and critic regressions. The
/// critic step is taken on the value error divided by the value scale.
DistillLoss distill_update(GaussianPolicy& student, ValueFunction& student_value,
                           std::span<const DistillRecord* const> batch, float actor_lr, float critic_lr,
                           float momentum);

struct DistillCurvePoint {
  std::size_t update = 0;
  double beta = 0.0;
  double actor_mse = 0.0;
  double critic_mse = 0.0;
};

struct DistillCurve {
  std::vector<DistillCurvePoint> points;
  std::string csv() const;  // update,beta,actor_mse,critic_mse
};

struct DistillResult {
  GaussianPolicy policy;
  ValueFunction value_fn;
  DistillCurve curve;
  std::vector<EvalReport> evals;  // one per task, empty for custom environments
};

using DistillProgressFn = std::function<void(const DistillCurvePoint&)>;

/// Collect/update loop over arbitrary environments.
DistillResult distill_with_envs(const ExpertAssignment& assignment, std::vector<std::string> task_names,
                                std::vector<std::unique_ptr<Environment>> envs, GaussianPolicy student,
                                ValueFunction student_value, const DistillConfig& cfg, std::uint64_t seed,
                                const DistillProgressFn& progress = {});

/// Distils the experts into the student on the biped tasks, then evaluates the
/// student on every task. Throws ShapeError when the student cannot consume a
/// task's observations (a missing injection step).
DistillResult distill(const ExpertAssignment& assignment, const std::vector<TaskSpec>& tasks,
                      GaussianPolicy student, ValueFunction student_value, const DistillConfig& cfg,
                      const EnvConfig& env, std::uint64_t seed, const DistillProgressFn& progress = {});

}  // namespace plaid
