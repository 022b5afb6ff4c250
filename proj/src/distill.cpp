#include "plaid/distill.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"

namespace plaid {

std::size_t ExpertAssignment::add_expert(Expert expert) {
  if (experts_.size() >= max_experts_) {
    throw ConfigError("at most " + std::to_string(max_experts_) + " experts may be held at once");
  }
  experts_.push_back(std::move(expert));
  return experts_.size() - 1;
}

void ExpertAssignment::assign(const std::string& task, std::size_t expert) {
  if (expert >= experts_.size()) throw ConfigError("no expert with index " + std::to_string(expert));
  if (!task_to_expert_.emplace(task, expert).second) {
    throw ConfigError("task " + task + " is already assigned to an expert");
  }
}

std::size_t ExpertAssignment::add_expert(Expert expert, const std::vector<std::string>& tasks) {
  const auto index = add_expert(std::move(expert));
  for (const auto& t : tasks) assign(t, index);
  return index;
}

std::size_t ExpertAssignment::expert_index(const std::string& task) const {
  const auto it = task_to_expert_.find(task);
  if (it == task_to_expert_.end()) throw ConfigError("task " + task + " has no expert");
  return it->second;
}

const Expert& ExpertAssignment::expert_for(const std::string& task) const {
  return experts_[expert_index(task)];
}

DistillBuffer::DistillBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("distillation buffer capacity must be >= 1");
}

void DistillBuffer::push(DistillRecord r) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(r));
}

std::vector<const DistillRecord*> DistillBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw UsageError("cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const DistillRecord*> out(n);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

void DistillConfig::validate() const {
  if (batch < 1) throw ConfigError("distill.batch must be >= 1");
  if (buffer_capacity < batch) throw ConfigError("distill.buffer_capacity must be >= distill.batch");
  if (steps_per_update < 1) throw ConfigError("distill.steps_per_update must be >= 1");
  if (!(actor_lr > 0.0f) || !(critic_lr > 0.0f)) throw ConfigError("distill learning rates must be > 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("distill.momentum must lie in [0, 1)");
  if (curve_interval < 1) throw ConfigError("distill.curve_interval must be >= 1");
}

double mixing_probability(std::size_t update_count, std::size_t anneal_updates) {
  if (update_count >= anneal_updates) return 0.0;
  return 1.0 - double(update_count) / double(anneal_updates);
}

DistillCollector::DistillCollector(std::vector<std::string> task_names,
                                   std::vector<std::unique_ptr<Environment>> envs, std::uint64_t seed)
    : task_names_(std::move(task_names)), envs_(std::move(envs)), seed_(seed) {
  if (task_names_.empty() || task_names_.size() != envs_.size()) {
    throw ConfigError("collector needs one environment per task");
  }
}

std::vector<DistillRecord> DistillCollector::collect(const ExpertAssignment& assignment,
                                                     const GaussianPolicy& student, double beta, Rng& rng,
                                                     std::size_t n) {
  for (const auto& name : task_names_) assignment.expert_index(name);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<DistillRecord> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (needs_reset_) {
      task_ = round_robin_task(episodes_, task_names_.size());
      obs_ = envs_[task_]->reset(derive_seed(seed_, "episode", episodes_));
      ++episodes_;
      needs_reset_ = false;
    }
    const Expert& expert = assignment.expert_for(task_names_[task_]);
    DistillRecord rec;
    rec.action_label = expert.policy.mean(obs_);
    rec.value_label = expert.value_fn.value(obs_);
    rec.task = task_;

    const bool expert_acts = coin(rng) < beta;
    std::vector<float> action = expert_acts ? rec.action_label : student.mean(obs_);
    if (beta > 0.0) {
      const auto& sigma = student.sigma();
      for (std::size_t i = 0; i < action.size() && i < sigma.size(); ++i) {
        action[i] += float(beta) * sigma[i] * float(standard_normal(rng));
      }
    }
    const float bound = float(student.action_bound());
    for (auto& a : action) a = std::clamp(a, -bound, bound);

    StepOutcome step = envs_[task_]->step(action);
    rec.obs = std::move(obs_);
    out.push_back(std::move(rec));
    obs_ = std::move(step.observation);
    needs_reset_ = step.done();
  }
  return out;
}

DistillLoss distill_update(GaussianPolicy& student, ValueFunction& student_value,
                           std::span<const DistillRecord* const> batch, float actor_lr, float critic_lr,
                           float momentum) {
  if (batch.empty()) throw UsageError("distill_update needs a non-empty batch");
  DistillLoss loss;

  Network& actor = student.net();
  ParamSet actor_grads = actor.zero_gradients();
  const std::size_t dims = actor.spec().output_width;
  const float actor_norm = 2.0f / float(batch.size() * dims);
  std::vector<float> g(dims);
  for (const auto* r : batch) {
    if (r->action_label.size() != dims) throw ShapeError("action label width does not match the student");
    const Tape tape = forward_tape(actor, r->obs.state, window_input(actor, r->obs));
    for (std::size_t k = 0; k < dims; ++k) {
      const float diff = tape.output[k] - r->action_label[k];
      loss.actor_mse += double(diff) * diff;
      g[k] = diff * actor_norm;
    }
    backward(actor, tape, g, actor_grads);
  }
  loss.actor_mse /= double(batch.size() * dims);

  Network& critic = student_value.net();
  ParamSet critic_grads = critic.zero_gradients();
  const float scale = student_value.scale();
  const float critic_norm = 2.0f / float(batch.size());
  for (const auto* r : batch) {
    const Tape tape = forward_tape(critic, r->obs.state, window_input(critic, r->obs));
    const double err = double(scale * tape.output[0]) - double(r->value_label);
    loss.critic_mse += err * err;
    const float gv = float(err / scale) * critic_norm;
    backward(critic, tape, std::span<const float>(&gv, 1), critic_grads);
  }
  loss.critic_mse /= double(batch.size());

  sgd_momentum_step(actor, actor_grads, actor_lr, momentum);
  sgd_momentum_step(critic, critic_grads, critic_lr, momentum);
  return loss;
}

std::string DistillCurve::csv() const {
  CsvWriter out{"update", "beta", "actor_mse", "critic_mse"};
  for (const auto& p : points) out.cell(p.update).cell(p.beta).cell(p.actor_mse).cell(p.critic_mse).end_row();
  return out.str();
}

DistillResult distill_with_envs(const ExpertAssignment& assignment, std::vector<std::string> task_names,
                                std::vector<std::unique_ptr<Environment>> envs, GaussianPolicy student,
                                ValueFunction student_value, const DistillConfig& cfg, std::uint64_t seed,
                                const DistillProgressFn& progress) {
  cfg.validate();
  DistillCollector collector(std::move(task_names), std::move(envs), derive_seed(seed, "collect"));
  DistillBuffer buffer(cfg.buffer_capacity);
  Rng collect_rng = make_rng(derive_seed(seed, "mixing"));
  Rng batch_rng = make_rng(derive_seed(seed, "minibatch"));
  DistillResult result{std::move(student), std::move(student_value), {}, {}};

  auto gather = [&](double beta, std::size_t n) {
    for (auto& r : collector.collect(assignment, result.policy, beta, collect_rng, n)) buffer.push(std::move(r));
  };
  if (cfg.updates > 0 && buffer.size() < cfg.batch) gather(1.0, cfg.batch);

  DistillCurvePoint acc;
  std::size_t in_window = 0;
  for (std::size_t u = 0; u < cfg.updates; ++u) {
    const double beta = mixing_probability(u, cfg.anneal_updates);
    gather(beta, cfg.steps_per_update);
    const auto batch = buffer.sample(cfg.batch, batch_rng);
    const auto loss = distill_update(result.policy, result.value_fn, batch, cfg.actor_lr, cfg.critic_lr,
                                     cfg.momentum);
    acc.actor_mse += loss.actor_mse;
    acc.critic_mse += loss.critic_mse;
    acc.beta += beta;
    ++in_window;
    if (in_window == cfg.curve_interval || u + 1 == cfg.updates) {
      DistillCurvePoint p{u + 1, acc.beta / double(in_window), acc.actor_mse / double(in_window),
                          acc.critic_mse / double(in_window)};
      result.curve.points.push_back(p);
      if (progress) progress(p);
      spdlog::debug("distill update {} actor mse {:.3g} critic mse {:.3g}", p.update, p.actor_mse, p.critic_mse);
      acc = {};
      in_window = 0;
    }
  }
  return result;
}

DistillResult distill(const ExpertAssignment& assignment, const std::vector<TaskSpec>& tasks,
                      GaussianPolicy student, ValueFunction student_value, const DistillConfig& cfg,
                      const EnvConfig& env, std::uint64_t seed, const DistillProgressFn& progress) {
  if (tasks.empty()) throw ConfigError("distillation needs at least one task");
  std::vector<std::string> names;
  std::vector<std::unique_ptr<Environment>> envs;
  for (const auto& task : tasks) {
    check_task_compatible(student.net(), task);
    check_task_compatible(student_value.net(), task);
    const Expert& expert = assignment.expert_for(task.name);
    check_task_compatible(expert.policy.net(), task);
    names.push_back(task.name);
    envs.push_back(std::make_unique<BipedEnv>(task, env));
  }
  DistillResult result = distill_with_envs(assignment, std::move(names), std::move(envs), std::move(student),
                                           std::move(student_value), cfg, seed, progress);
  if (cfg.eval_runs > 0) result.evals = evaluate_policy(result.policy, tasks, env, cfg.eval_runs, cfg.eval_seed);
  return result;
}

}  // namespace plaid
