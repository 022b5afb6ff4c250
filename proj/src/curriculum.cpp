#include "plaid/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "plaid/checkpoint.hpp"
#include "plaid/csv.hpp"
#include "plaid/error.hpp"
#include "plaid/inject.hpp"

namespace plaid {

namespace fs = std::filesystem;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::plaid: return "plaid";
    case Method::multitasker: return "multitasker";
    case Method::parallel: return "parallel";
    case Method::tl_only: return "tl_only";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (auto m : kMethods) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string method_names() {
  std::string out;
  for (auto m : kMethods) {
    if (!out.empty()) out += ", ";
    out += to_string(m);
  }
  return out;
}

std::vector<TaskSpec> CurriculumPlan::default_tasks(std::size_t episode_limit) {
  std::vector<TaskSpec> tasks;
  for (auto kind : kBaseTerrainKinds) tasks.push_back(TaskSpec::for_kind(kind, episode_limit));
  return tasks;
}

void CurriculumPlan::validate() const {
  if (tasks.empty()) throw ConfigError("plan.tasks must not be empty");
  if (tl_iters < 1) throw ConfigError("plan.tl_iters must be >= 1");
  if (distill_updates < 1) throw ConfigError("plan.distill_updates must be >= 1");
  std::set<std::string> names;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!names.insert(tasks[i].name).second) throw ConfigError("plan.tasks lists " + tasks[i].name + " twice");
    if (tasks[i].requires_terrain_features && !task_sighted(i)) {
      throw ConfigError("task " + tasks[i].name + " needs terrain features but the terrain branch is injected after task " +
                        tasks[*injection_after].name);
    }
  }
}

NetworkSpec ExperimentConfig::policy_spec(bool sighted) const {
  NetworkSpec s;
  s.input_width = kStateDim;
  s.hidden_widths = hidden_widths;
  s.output_width = kActionDim;
  if (sighted) s.terrain_branch = branch;
  return s;
}

NetworkSpec ExperimentConfig::value_spec(bool sighted) const {
  NetworkSpec s = policy_spec(sighted);
  s.output_width = 1;
  return s;
}

void ExperimentConfig::validate() const {
  plan.validate();
  train.validate();
  distill.validate();
  env.validate();
  policy_spec(true).validate();
  if (branch.window != env.terrain.window_samples) {
    throw ConfigError("network.terrain_branch window must equal env.terrain.window_samples");
  }
  if (eval_runs < 1) throw ConfigError("evaluation.runs must be >= 1");
}

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::init: return "init";
    case NodeKind::tl: return "tl";
    case NodeKind::distill: return "distill";
    case NodeKind::multitask: return "multitask";
  }
  return "unknown";
}

std::optional<NodeKind> parse_node_kind(std::string_view name) {
  for (auto k : {NodeKind::init, NodeKind::tl, NodeKind::distill, NodeKind::multitask}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

const EvalReport* LineageNode::eval_for(std::string_view task) const {
  for (const auto& r : evals) {
    if (r.task == task) return &r;
  }
  return nullptr;
}

const LineageNode& PolicyLineage::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw ConfigError("lineage has no node " + std::string(id));
}

bool PolicyLineage::has_node(std::string_view id) const {
  return std::any_of(nodes.begin(), nodes.end(), [&](const LineageNode& n) { return n.id == id; });
}

std::size_t PolicyLineage::count(NodeKind kind) const {
  return std::size_t(std::count_if(nodes.begin(), nodes.end(), [&](const LineageNode& n) { return n.kind == kind; }));
}

void PolicyLineage::validate() const {
  std::map<std::string, const LineageNode*> seen;
  for (const auto& n : nodes) {
    if (seen.count(n.id)) throw ConfigError("lineage node " + n.id + " appears twice");
    for (const auto& p : n.parents) {
      if (!seen.count(p)) throw ConfigError("lineage node " + n.id + " has parent " + p + " that does not precede it");
    }
    if (n.kind == NodeKind::init && !n.parents.empty()) throw ConfigError("init node " + n.id + " has parents");
    if (n.kind != NodeKind::init && n.parents.empty()) throw ConfigError("lineage node " + n.id + " has no parent");
    if (n.kind == NodeKind::distill) {
      std::set<std::string> expected;
      for (const auto& p : n.parents) expected.insert(seen[p]->coverage.begin(), seen[p]->coverage.end());
      if (std::set<std::string>(n.coverage.begin(), n.coverage.end()) != expected) {
        throw ConfigError("distill node " + n.id + " coverage is not the union of its parents'");
      }
    }
    seen[n.id] = &n;
  }
  if (!final_node.empty() && !seen.count(final_node)) throw ConfigError("lineage final node " + final_node + " is missing");
}

namespace {

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

std::string PolicyLineage::manifest_csv() const {
  CsvWriter csv{"node_id", "kind", "parents", "tasks"};
  for (const auto& n : nodes) csv.cell(n.id).cell(to_string(n.kind)).cell(join(n.parents, ';')).cell(join(n.coverage, ';')).end_row();
  return csv.str();
}

void write_lineage_meta(const PolicyLineage& lineage, const fs::path& dir) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "method" << YAML::Value << std::string(to_string(lineage.method));
  out << YAML::Key << "tasks" << YAML::Value << YAML::Flow << lineage.tasks;
  out << YAML::Key << "final_node" << YAML::Value << lineage.final_node;
  out << YAML::Key << "original_nodes" << YAML::Value << YAML::BeginMap;
  for (const auto& task : lineage.tasks) {
    const auto it = lineage.original_node.find(task);
    if (it != lineage.original_node.end()) out << YAML::Key << task << YAML::Value << it->second;
  }
  out << YAML::EndMap;
  out << YAML::Key << "eval_runs" << YAML::Value << lineage.eval_runs;
  out << YAML::Key << "eval_seed" << YAML::Value << lineage.eval_seed;
  out << YAML::Key << "max_resident_experts" << YAML::Value << lineage.max_resident_experts;
  out << YAML::Key << "injections" << YAML::Value << lineage.injections;
  out << YAML::EndMap;
  write_text_file(dir / "lineage.yaml", std::string(out.c_str()) + "\n");
  write_text_file(dir / "manifest.csv", lineage.manifest_csv());
}

PolicyLineage read_lineage(const fs::path& dir) {
  PolicyLineage lineage;
  YAML::Node meta;
  try {
    meta = YAML::LoadFile((dir / "lineage.yaml").string());
    const auto method = parse_method(meta["method"].as<std::string>());
    if (!method) throw ConfigError("unknown method in " + (dir / "lineage.yaml").string());
    lineage.method = *method;
    lineage.tasks = meta["tasks"].as<std::vector<std::string>>();
    lineage.final_node = meta["final_node"].as<std::string>();
    for (const auto& kv : meta["original_nodes"]) {
      lineage.original_node[kv.first.as<std::string>()] = kv.second.as<std::string>();
    }
    lineage.eval_runs = meta["eval_runs"].as<std::size_t>();
    lineage.eval_seed = meta["eval_seed"].as<std::uint64_t>();
    lineage.max_resident_experts = meta["max_resident_experts"].as<std::size_t>();
    lineage.injections = meta["injections"].as<std::size_t>();
  } catch (const YAML::Exception& e) {
    throw ConfigError((dir / "lineage.yaml").string() + ": " + e.what());
  }

  const auto rows = parse_csv(read_text_file(dir / "manifest.csv"));
  if (rows.empty() || rows[0] != std::vector<std::string>{"node_id", "kind", "parents", "tasks"}) {
    throw FormatError((dir / "manifest.csv").string() + " has an unexpected header");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw FormatError((dir / "manifest.csv").string() + " row " + std::to_string(i + 1) + " has wrong width");
    LineageNode n;
    n.id = rows[i][0];
    const auto kind = parse_node_kind(rows[i][1]);
    if (!kind) throw FormatError("unknown node kind " + rows[i][1]);
    n.kind = *kind;
    n.parents = split(rows[i][2], ';');
    n.coverage = split(rows[i][3], ';');
    const fs::path eval = dir / n.id / "eval.csv";
    if (fs::exists(eval)) n.evals = parse_eval_report_csv(read_text_file(eval));
    lineage.nodes.push_back(std::move(n));
  }
  lineage.validate();
  return lineage;
}

// ---- runs ---------------------------------------------------------------

namespace {

struct Agent {
  GaussianPolicy policy;
  ValueFunction value;
};

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks)
      : cfg_(cfg), seed_(seed), hooks_(hooks) {
    cfg_.validate();
    auto& lin = result_.lineage;
    lin.method = cfg.plan.method;
    for (const auto& t : cfg.plan.tasks) lin.tasks.push_back(t.name);
    lin.eval_runs = cfg.eval_runs;
    lin.eval_seed = cfg.eval_seed;
    if (hooks_.lineage_dir) fs::create_directories(*hooks_.lineage_dir);
  }

  const std::vector<TaskSpec>& tasks() const { return cfg_.plan.tasks; }
  std::size_t omega() const { return tasks().size(); }

  Agent fresh(bool sighted, std::size_t index) {
    return {GaussianPolicy::create(cfg_.policy_spec(sighted), derive_seed(seed_, "init_policy", index),
                                   cfg_.train.sigma_scale, cfg_.env.biped.action_bound),
            ValueFunction::create(cfg_.value_spec(sighted), derive_seed(seed_, "init_value", index), cfg_.train.gamma)};
  }

  Agent inject(const Agent& a) {
    Agent out = a;
    out.policy.net() = attach_terrain_branch(a.policy.net(), cfg_.branch, derive_seed(seed_, "inject_policy"));
    out.value.net() = attach_terrain_branch(a.value.net(), cfg_.branch, derive_seed(seed_, "inject_value"));
    ++result_.lineage.injections;
    spdlog::info("terrain branch injected");
    return out;
  }

  std::string add_init(const Agent& agent) {
    return add_node(NodeKind::init, {}, {}, agent, false, false);
  }

  /// Trains a copy of `start` on the given tasks (round-robin when several).
  Agent train(const Agent& start, const std::vector<std::size_t>& task_indices, std::size_t stage,
              const std::string& node_id) {
    std::vector<TaskSpec> ts;
    for (auto i : task_indices) ts.push_back(tasks()[i]);
    TrainConfig tc = cfg_.train;
    tc.max_iters = cfg_.plan.tl_iters;
    spdlog::info("{}: training on {} task(s) for {} iterations", node_id, ts.size(), tc.max_iters);
    ProgressFn progress;
    if (hooks_.on_train_point) progress = [&](const CurvePoint& p) { hooks_.on_train_point(node_id, p); };
    auto r = train_multitask(start.policy, start.value, ts, tc, cfg_.env, derive_seed(seed_, "train", stage), progress);
    result_.train_curves[node_id] = std::move(r.curve);
    return {std::move(r.policy), std::move(r.value_fn)};
  }

  Agent distill_into(const ExpertAssignment& experts, const std::vector<std::size_t>& task_indices,
                     const Agent& student, std::size_t stage, const std::string& node_id) {
    result_.lineage.max_resident_experts = std::max(result_.lineage.max_resident_experts, experts.experts().size());
    std::vector<TaskSpec> ts;
    for (auto i : task_indices) ts.push_back(tasks()[i]);
    DistillConfig dc = cfg_.distill;
    dc.updates = cfg_.plan.distill_updates;
    dc.eval_runs = 0;
    spdlog::info("{}: distilling {} expert(s) over {} task(s) for {} updates", node_id, experts.experts().size(),
                 ts.size(), dc.updates);
    DistillProgressFn progress;
    if (hooks_.on_distill_point) progress = [&](const DistillCurvePoint& p) { hooks_.on_distill_point(node_id, p); };
    auto r = distill(experts, ts, student.policy, student.value, dc, cfg_.env, derive_seed(seed_, "distill", stage),
                     progress);
    result_.distill_curves[node_id] = std::move(r.curve);
    return {std::move(r.policy), std::move(r.value_fn)};
  }

  std::string next_id(NodeKind kind, const std::string& label) const {
    std::string index = std::to_string(result_.lineage.nodes.size());
    if (index.size() < 2) index.insert(0, 2 - index.size(), '0');
    return index + "_" + std::string(to_string(kind)) + (label.empty() ? "" : "_" + label);
  }

  /// Evaluates and records a node; the final node is evaluated on every task.
  std::string add_node(NodeKind kind, std::vector<std::string> parents, std::vector<std::string> coverage,
                       const Agent& agent, bool is_final, bool injected, const std::string& id = {}) {
    LineageNode node;
    node.id = id.empty() ? next_id(kind, coverage.empty() ? "" : coverage.back()) : id;
    node.kind = kind;
    node.parents = std::move(parents);
    node.coverage = std::move(coverage);
    node.injected = injected;
    if (kind != NodeKind::init) {
      for (const auto& task : tasks()) {
        const bool covered = std::find(node.coverage.begin(), node.coverage.end(), task.name) != node.coverage.end();
        if (covered || is_final) {
          node.evals.push_back(evaluate_policy(agent.policy, task, cfg_.env, cfg_.eval_runs, cfg_.eval_seed));
          spdlog::info("{}: {} mean reward {:.4f}", node.id, task.name, node.evals.back().mean);
        }
      }
    }
    if (hooks_.lineage_dir) persist(node, agent);
    auto& lin = result_.lineage;
    lin.nodes.push_back(node);
    if (is_final) lin.final_node = node.id;
    if (hooks_.lineage_dir) write_lineage_meta(lin, *hooks_.lineage_dir);
    if (hooks_.on_node) hooks_.on_node(lin.nodes.back());
    return node.id;
  }

  void set_original(std::size_t task, const std::string& node) {
    result_.lineage.original_node[tasks()[task].name] = node;
    if (hooks_.lineage_dir) write_lineage_meta(result_.lineage, *hooks_.lineage_dir);
  }

  CurriculumResult finish(Agent final_agent) {
    result_.lineage.validate();
    if (hooks_.lineage_dir) write_lineage_meta(result_.lineage, *hooks_.lineage_dir);
    result_.final_policy = std::move(final_agent.policy);
    result_.final_value = std::move(final_agent.value);
    return std::move(result_);
  }

  /// Runs `body`; on failure the partial lineage stays on disk with the error noted.
  template <typename F>
  CurriculumResult guarded(F&& body) {
    try {
      return body();
    } catch (const std::exception& e) {
      if (hooks_.lineage_dir) {
        write_lineage_meta(result_.lineage, *hooks_.lineage_dir);
        write_text_file(*hooks_.lineage_dir / "error.txt", std::string(e.what()) + "\n");
      }
      throw;
    }
  }

 private:
  void persist(const LineageNode& node, const Agent& agent) {
    const fs::path dir = *hooks_.lineage_dir / node.id;
    fs::create_directories(dir);
    write_checkpoint(agent.policy.net(), dir / "policy.plaidckpt");
    write_checkpoint(agent.value.net(), dir / "value.plaidckpt");
    if (!node.evals.empty()) write_text_file(dir / "eval.csv", eval_report_csv(node.evals));
    CsvWriter line{"node_id", "kind", "parents", "tasks"};
    line.cell(node.id).cell(to_string(node.kind)).cell(join(node.parents, ';')).cell(join(node.coverage, ';')).end_row();
    write_text_file(dir / "node.csv", line.str());
    if (auto it = result_.train_curves.find(node.id); it != result_.train_curves.end()) {
      write_text_file(dir / "curve.csv", it->second.csv());
    }
    if (auto it = result_.distill_curves.find(node.id); it != result_.distill_curves.end()) {
      write_text_file(dir / "distill.csv", it->second.csv());
    }
  }

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  const RunHooks& hooks_;
  CurriculumResult result_;
};

std::vector<std::size_t> first_tasks(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

Expert as_expert(const std::string& id, const Agent& a) { return Expert{id, a.policy, a.value}; }

}  // namespace

CurriculumResult run_plaid(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks) {
  if (cfg.plan.method != Method::plaid) throw ConfigError("run_plaid needs plan.method = plaid");
  Runner run(cfg, seed, hooks);
  return run.guarded([&] {
    const std::size_t omega = run.omega();
    const auto& plan = cfg.plan;
    Agent consolidated = run.fresh(plan.task_sighted(0), 0);
    std::string consolidated_id = run.add_init(consolidated);
    std::vector<std::string> covered;

    for (std::size_t i = 0; i < omega; ++i) {
      const std::string& name = run.tasks()[i].name;
      const bool last = i + 1 == omega;
      const std::string tl_id = run.next_id(NodeKind::tl, name);
      Agent expert = run.train(consolidated, {i}, i, tl_id);
      run.add_node(NodeKind::tl, {consolidated_id}, {name}, expert, last && i == 0, false, tl_id);
      run.set_original(i, tl_id);

      if (i == 0) {
        consolidated = std::move(expert);
        consolidated_id = tl_id;
        covered = {name};
        if (plan.injection_after == std::size_t{0} && plan.injects()) consolidated = run.inject(consolidated);
        continue;
      }
      // At most two experts: the consolidated policy and the newest one.
      ExpertAssignment experts(2);
      experts.add_expert(as_expert(consolidated_id, consolidated), covered);
      experts.add_expert(as_expert(tl_id, expert), {name});
      const bool inject_here = plan.injects() && plan.injection_after == i;
      Agent student = inject_here ? run.inject(expert) : expert;  // most recently trained policy
      const std::string d_id = run.next_id(NodeKind::distill, name);
      Agent result = run.distill_into(experts, first_tasks(i + 1), student, i, d_id);
      covered.push_back(name);
      run.add_node(NodeKind::distill, {consolidated_id, tl_id}, covered, result, last, inject_here, d_id);
      consolidated = std::move(result);
      consolidated_id = d_id;
    }
    return run.finish(std::move(consolidated));
  });
}

CurriculumResult run_multitasker(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks) {
  if (cfg.plan.method != Method::multitasker) throw ConfigError("run_multitasker needs plan.method = multitasker");
  Runner run(cfg, seed, hooks);
  return run.guarded([&] {
    const auto& plan = cfg.plan;
    Agent current = run.fresh(plan.task_sighted(0), 0);
    std::string parent = run.add_init(current);
    std::vector<std::string> active;
    for (std::size_t i = 0; i < run.omega(); ++i) {
      bool injected = false;
      if (plan.injects() && i == *plan.injection_after + 1) {
        current = run.inject(current);
        injected = true;
      }
      active.push_back(run.tasks()[i].name);
      const std::string id = run.next_id(NodeKind::multitask, active.back());
      current = run.train(current, first_tasks(i + 1), i, id);
      parent = run.add_node(NodeKind::multitask, {parent}, active, current, i + 1 == run.omega(), injected, id);
      run.set_original(i, id);
    }
    return run.finish(std::move(current));
  });
}

CurriculumResult run_parallel(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks) {
  if (cfg.plan.method != Method::parallel) throw ConfigError("run_parallel needs plan.method = parallel");
  Runner run(cfg, seed, hooks);
  return run.guarded([&] {
    const std::size_t omega = run.omega();
    ExpertAssignment experts(omega);
    std::vector<std::string> expert_ids;
    Agent newest;
    for (std::size_t i = 0; i < omega; ++i) {
      // Independent random initializations; tasks that need terrain features start sighted.
      const auto& task = run.tasks()[i];
      Agent init = run.fresh(task.requires_terrain_features || !cfg.plan.injection_after, i);
      const std::string init_id = run.add_init(init);
      const std::string tl_id = run.next_id(NodeKind::tl, task.name);
      newest = run.train(init, {i}, i, tl_id);
      run.add_node(NodeKind::tl, {init_id}, {task.name}, newest, false, false, tl_id);
      run.set_original(i, tl_id);
      experts.add_expert(as_expert(tl_id, newest), {task.name});
      expert_ids.push_back(tl_id);
    }
    const bool any_sighted = std::any_of(run.tasks().begin(), run.tasks().end(),
                                         [](const TaskSpec& t) { return t.requires_terrain_features; });
    const bool inject_here = any_sighted && !newest.policy.net().has_terrain_branch();
    Agent student = inject_here ? run.inject(newest) : newest;
    std::vector<std::string> all;
    for (const auto& t : run.tasks()) all.push_back(t.name);
    const std::string d_id = run.next_id(NodeKind::distill, "all");
    Agent result = run.distill_into(experts, first_tasks(omega), student, omega, d_id);
    run.add_node(NodeKind::distill, expert_ids, all, result, true, inject_here, d_id);
    return run.finish(std::move(result));
  });
}

CurriculumResult run_tl_only(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks) {
  if (cfg.plan.method != Method::tl_only) throw ConfigError("run_tl_only needs plan.method = tl_only");
  Runner run(cfg, seed, hooks);
  return run.guarded([&] {
    const auto& plan = cfg.plan;
    const std::size_t omega = run.omega();
    Agent current = run.fresh(plan.task_sighted(0), 0);
    std::string parent = run.add_init(current);
    // The whole chain is kept: the terminal distillation and the forgetting table need it.
    ExpertAssignment experts(omega);
    std::vector<std::string> chain;
    for (std::size_t i = 0; i < omega; ++i) {
      if (plan.injects() && i == *plan.injection_after + 1) current = run.inject(current);
      const std::string& name = run.tasks()[i].name;
      const std::string id = run.next_id(NodeKind::tl, name);
      current = run.train(current, {i}, i, id);
      const bool last = i + 1 == omega && !plan.terminal_distill;
      parent = run.add_node(NodeKind::tl, {parent}, {name}, current, last, false, id);
      run.set_original(i, id);
      if (plan.terminal_distill) experts.add_expert(as_expert(id, current), {name});
      chain.push_back(id);
    }
    if (!plan.terminal_distill) return run.finish(std::move(current));
    std::vector<std::string> all;
    for (const auto& t : run.tasks()) all.push_back(t.name);
    const std::string d_id = run.next_id(NodeKind::distill, "all");
    Agent result = run.distill_into(experts, first_tasks(omega), current, omega, d_id);
    run.add_node(NodeKind::distill, chain, all, result, true, false, d_id);
    return run.finish(std::move(result));
  });
}

CurriculumResult run_curriculum(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks) {
  switch (cfg.plan.method) {
    case Method::plaid: return run_plaid(cfg, seed, hooks);
    case Method::multitasker: return run_multitasker(cfg, seed, hooks);
    case Method::parallel: return run_parallel(cfg, seed, hooks);
    case Method::tl_only: return run_tl_only(cfg, seed, hooks);
  }
  throw ConfigError("unknown method");
}

// ---- tables -------------------------------------------------------------

std::optional<double> relative_change(double original, double final_reward) {
  if (original == 0.0) return std::nullopt;
  return (final_reward - original) / original;
}

std::optional<double> forgetting_average(const std::vector<std::optional<double>>& row) {
  if (row.empty()) return std::nullopt;
  if (row.size() == 1) return row[0];
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < row.size(); ++i) {
    if (!row[i]) return std::nullopt;
    sum += *row[i];
  }
  return sum / double(row.size() - 1);
}

double row_average(const std::vector<double>& row) {
  if (row.empty()) return 0.0;
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / double(row.size());
}

namespace {

const EvalReport& require_eval(const PolicyLineage& lineage, const std::string& node_id, const std::string& task) {
  if (!lineage.has_node(node_id)) throw MissingEvalError(node_id, "lineage node " + node_id + " is missing");
  const auto* r = lineage.node(node_id).eval_for(task);
  if (!r) throw MissingEvalError(node_id, "node " + node_id + " has no evaluation for task " + task);
  return *r;
}

void require_same_seeds(const EvalReport& a, const EvalReport& b) {
  if (a.episode_seeds != b.episode_seeds) {
    throw ConfigError("evaluations of task " + a.task + " were run on different terrain seeds");
  }
}

std::string label_of(const PolicyLineage& lineage) {
  std::string label(to_string(lineage.method));
  if (lineage.method == Method::tl_only && lineage.has_node(lineage.final_node) &&
      lineage.node(lineage.final_node).kind == NodeKind::distill) {
    label += "_distill";
  }
  return label;
}

}  // namespace

ForgettingRow forgetting_row(const PolicyLineage& lineage) {
  if (lineage.final_node.empty()) throw MissingEvalError("", "lineage has no final node");
  ForgettingRow row;
  row.label = label_of(lineage);
  for (const auto& task : lineage.tasks) {
    const auto it = lineage.original_node.find(task);
    if (it == lineage.original_node.end()) throw MissingEvalError("", "task " + task + " has no original node");
    const auto& original = require_eval(lineage, it->second, task);
    const auto& final_r = require_eval(lineage, lineage.final_node, task);
    require_same_seeds(original, final_r);
    row.values.push_back(relative_change(original.mean, final_r.mean));
  }
  row.average = forgetting_average(row.values);
  return row;
}

FinalEvalRow final_eval_row(const PolicyLineage& lineage) {
  if (lineage.final_node.empty()) throw MissingEvalError("", "lineage has no final node");
  FinalEvalRow row;
  row.label = label_of(lineage);
  for (const auto& task : lineage.tasks) row.values.push_back(require_eval(lineage, lineage.final_node, task).mean);
  row.average = row_average(row.values);
  return row;
}

namespace {

void require_compatible(const std::vector<PolicyLineage>& lineages) {
  if (lineages.empty()) throw UsageError("a table needs at least one lineage");
  const auto& first = lineages.front();
  for (const auto& l : lineages) {
    if (l.tasks != first.tasks) throw ConfigError("lineages cover different task lists");
    for (const auto& task : l.tasks) {
      require_same_seeds(require_eval(first, first.final_node, task), require_eval(l, l.final_node, task));
    }
  }
}

std::vector<std::string> header_for(const std::vector<std::string>& tasks) {
  std::vector<std::string> h{"method"};
  h.insert(h.end(), tasks.begin(), tasks.end());
  h.push_back("average");
  return h;
}

}  // namespace

ForgettingTable forgetting_table(const std::vector<PolicyLineage>& lineages) {
  require_compatible(lineages);
  ForgettingTable t;
  t.tasks = lineages.front().tasks;
  for (const auto& l : lineages) t.rows.push_back(forgetting_row(l));
  return t;
}

FinalEvalTable final_eval_table(const std::vector<PolicyLineage>& lineages) {
  require_compatible(lineages);
  FinalEvalTable t;
  t.tasks = lineages.front().tasks;
  for (const auto& l : lineages) t.rows.push_back(final_eval_row(l));
  return t;
}

std::string ForgettingTable::csv() const {
  CsvWriter csv(header_for(tasks));
  for (const auto& r : rows) {
    csv.cell(r.label);
    for (const auto& v : r.values) v ? csv.cell(*v) : csv.empty_cell();
    r.average ? csv.cell(*r.average) : csv.empty_cell();
    csv.end_row();
  }
  return csv.str();
}

std::string FinalEvalTable::csv() const {
  CsvWriter csv(header_for(tasks));
  for (const auto& r : rows) {
    csv.cell(r.label);
    for (double v : r.values) csv.cell(v);
    csv.cell(r.average).end_row();
  }
  return csv.str();
}

}  // namespace plaid
