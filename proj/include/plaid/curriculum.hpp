#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plaid/distill.hpp"
#include "plaid/evaluate.hpp"
#include "plaid/policy.hpp"

namespace plaid {

enum class Method { plaid, multitasker, parallel, tl_only };

inline constexpr std::array<Method, 4> kMethods = {Method::plaid, Method::multitasker, Method::parallel,
                                                   Method::tl_only};

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view name);
/// "plaid, multitasker, parallel, tl_only"
std::string method_names();

struct CurriculumPlan {
  Method method = Method::plaid;
  std::vector<TaskSpec> tasks = default_tasks();
  std::size_t tl_iters = 200000;
  std::size_t distill_updates = 50000;
  /// The terrain branch is injected before training on the task after this
  /// index. nullopt: every network carries the branch from initialization.
  std::optional<std::size_t> injection_after = 1;
  /// tl_only: finish with one distillation over every chain checkpoint.
  bool terminal_distill = false;

  static std::vector<TaskSpec> default_tasks(std::size_t episode_limit = 3000);

  /// Throws ConfigError, e.g. when a task needing terrain features precedes the injection.
  void validate() const;
  bool injects() const { return injection_after && *injection_after + 1 < tasks.size(); }
  bool task_sighted(std::size_t index) const { return !injection_after || index > *injection_after; }
};

/// Everything a curriculum run needs.
struct ExperimentConfig {
  CurriculumPlan plan;
  TrainConfig train;
  DistillConfig distill;
  EnvConfig env;
  std::vector<std::size_t> hidden_widths{512, 256};
  TerrainBranchSpec branch;
  std::size_t eval_runs = 16;
  std::uint64_t eval_seed = 7;

  NetworkSpec policy_spec(bool sighted) const;
  NetworkSpec value_spec(bool sighted) const;
  void validate() const;
};

enum class NodeKind { init, tl, distill, multitask };
std::string_view to_string(NodeKind k);
std::optional<NodeKind> parse_node_kind(std::string_view name);

struct LineageNode {
  std::string id;
  NodeKind kind = NodeKind::init;
  std::vector<std::string> parents;
  std::vector<std::string> coverage;  // task names
  std::vector<EvalReport> evals;
  bool injected = false;  // terrain branch attached when this node was created

  const EvalReport* eval_for(std::string_view task) const;
};

struct PolicyLineage {
  Method method = Method::plaid;
  std::vector<std::string> tasks;
  std::vector<LineageNode> nodes;  // topological order
  std::string final_node;
  std::map<std::string, std::string> original_node;  // task -> node that first learned it
  std::size_t eval_runs = 0;
  std::uint64_t eval_seed = 0;
  std::size_t max_resident_experts = 0;
  std::size_t injections = 0;

  const LineageNode& node(std::string_view id) const;
  bool has_node(std::string_view id) const;
  std::size_t count(NodeKind kind) const;
  /// Parents precede children; distill coverage is the union of its parents'.
  void validate() const;

  std::string manifest_csv() const;  // node_id,kind,parents,tasks
};

/// Optional persistence and progress hooks for a run.
struct RunHooks {
  /// When set, every node is written under this directory as soon as it exists.
  std::optional<std::filesystem::path> lineage_dir;
  std::function<void(const std::string& node, const CurvePoint&)> on_train_point;
  std::function<void(const std::string& node, const DistillCurvePoint&)> on_distill_point;
  std::function<void(const LineageNode&)> on_node;
};

struct CurriculumResult {
  PolicyLineage lineage;
  GaussianPolicy final_policy;
  ValueFunction final_value;
  std::map<std::string, LearningCurve> train_curves;     // by node id
  std::map<std::string, DistillCurve> distill_curves;    // by node id
};

CurriculumResult run_plaid(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});
CurriculumResult run_multitasker(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});
CurriculumResult run_parallel(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});
CurriculumResult run_tl_only(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});
/// Dispatches on cfg.plan.method.
CurriculumResult run_curriculum(const ExperimentConfig& cfg, std::uint64_t seed, const RunHooks& hooks = {});

/// Lineage directory: manifest.csv, lineage.yaml, and one directory per node
/// holding policy/value checkpoints, eval.csv and node.csv.
void write_lineage_meta(const PolicyLineage& lineage, const std::filesystem::path& dir);
PolicyLineage read_lineage(const std::filesystem::path& dir);

// ---- tables -------------------------------------------------------------

/// (final - original) / original; nullopt when original is 0.
std::optional<double> relative_change(double original, double final_reward);

/// Mean over every task except the last one trained (its final policy is, or
/// was just distilled from, the original). Undefined entries make it undefined.
std::optional<double> forgetting_average(const std::vector<std::optional<double>>& row);

double row_average(const std::vector<double>& row);

struct ForgettingRow {
  std::string label;
  std::vector<std::optional<double>> values;
  std::optional<double> average;
};

struct FinalEvalRow {
  std::string label;
  std::vector<double> values;
  double average = 0.0;
};

struct ForgettingTable {
  std::vector<std::string> tasks;
  std::vector<ForgettingRow> rows;
  std::string csv() const;  // method,<tasks...>,average; undefined cells are empty
};

struct FinalEvalTable {
  std::vector<std::string> tasks;
  std::vector<FinalEvalRow> rows;
  std::string csv() const;  // method,<tasks...>,average
};

/// Throws MissingEvalError naming the node whose report is absent, and
/// ConfigError when the original and final reports were run on different seeds.
ForgettingRow forgetting_row(const PolicyLineage& lineage);
FinalEvalRow final_eval_row(const PolicyLineage& lineage);

/// One row per lineage; all lineages must share tasks and evaluation seeds.
ForgettingTable forgetting_table(const std::vector<PolicyLineage>& lineages);
FinalEvalTable final_eval_table(const std::vector<PolicyLineage>& lineages);

}  // namespace plaid
