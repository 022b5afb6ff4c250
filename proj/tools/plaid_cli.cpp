// plaid: command-line front end for training, distillation, injection,
// curricula, evaluation and reports.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "plaid/checkpoint.hpp"
#include "plaid/config.hpp"
#include "plaid/csv.hpp"
#include "plaid/curriculum.hpp"
#include "plaid/distill.hpp"
#include "plaid/error.hpp"
#include "plaid/inject.hpp"
#include "plaid/svg.hpp"

namespace fs = std::filesystem;
using namespace plaid;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kSimFault = 3, kMissingEval = 4, kShape = 5 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("plaid");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("PLAID_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when asked for.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

/// Refuses to touch a non-empty directory unless forced; forced runs start clean.
void prepare_out(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_directory(out)) throw UsageError(out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) throw UsageError("output directory " + out.string() + " is not empty (pass --force to overwrite)");
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

LoadedConfig config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return load_config(path);
}

std::uint64_t pick_seed(const std::optional<std::uint64_t>& flag, const LoadedConfig& cfg) {
  if (flag) return *flag;
  return cfg.seed.value_or(0);
}

TaskSpec task_named(const std::string& name, const ExperimentConfig& cfg) {
  const auto kind = parse_terrain_kind(name);
  if (!kind) throw ConfigError("unknown task '" + name + "' (valid: flat, incline, steps, slopes, gaps, mixed)");
  return TaskSpec::for_kind(*kind, cfg.plan.tasks.front().episode_limit);
}

struct Pair {
  GaussianPolicy policy;
  ValueFunction value;
};

fs::path policy_path(const fs::path& p) { return fs::is_directory(p) ? p / "policy.plaidckpt" : p; }

Pair load_pair(const fs::path& dir, const ExperimentConfig& cfg) {
  GaussianPolicy policy(read_checkpoint(dir / "policy.plaidckpt"),
                        std::vector<float>(kActionDim, float(cfg.train.sigma_scale * cfg.env.biped.action_bound)));
  policy.set_action_bound(cfg.env.biped.action_bound);
  ValueFunction value(read_checkpoint(dir / "value.plaidckpt"), float(1.0 / (1.0 - cfg.train.gamma)));
  return {std::move(policy), std::move(value)};
}

void save_pair(const Pair& p, const fs::path& dir) {
  write_checkpoint(p.policy.net(), dir / "policy.plaidckpt");
  write_checkpoint(p.value.net(), dir / "value.plaidckpt");
}

void print_reports(const std::vector<EvalReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.task << " mean " << format_number(r.mean) << " std " << format_number(r.std) << "\n";
  }
}

Series curve_series(const std::string& label, const LearningCurve& c) {
  Series s{label, {}, {}, {}};
  for (const auto& p : c.points) {
    s.x.push_back(double(p.iteration));
    s.mean.push_back(p.mean_reward);
    s.std.push_back(p.std_reward);
  }
  return s;
}

LearningCurve parse_curve_csv(const fs::path& path) {
  const auto rows = parse_csv(read_text_file(path));
  LearningCurve c;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 5) throw FormatError(path.string() + " row " + std::to_string(i + 1) + " has wrong width");
    CurvePoint p;
    p.iteration = std::stoull(rows[i][0]);
    p.sim_steps = std::stoull(rows[i][1]);
    p.mean_reward = std::stod(rows[i][2]);
    p.std_reward = std::stod(rows[i][3]);
    p.epsilon = std::stod(rows[i][4]);
    c.points.push_back(p);
  }
  return c;
}

/// Concatenates the training-stage curves of a lineage along the iteration axis.
std::pair<std::vector<double>, std::vector<double>> stitched_curve(const PolicyLineage& lineage,
                                                                   const std::map<std::string, LearningCurve>& curves) {
  std::vector<double> x, y;
  double offset = 0.0;
  for (const auto& n : lineage.nodes) {
    const auto it = curves.find(n.id);
    if (it == curves.end()) continue;
    double last = 0.0;
    for (const auto& p : it->second.points) {
      x.push_back(offset + double(p.iteration));
      y.push_back(p.mean_reward);
      last = double(p.iteration);
    }
    offset += last;
  }
  return {x, y};
}

/// Mean +/- std over repeats of the stitched training curve.
std::string repeat_band_svg(const std::string& title, const std::vector<PolicyLineage>& lineages,
                            const std::vector<std::map<std::string, LearningCurve>>& curves) {
  std::vector<std::vector<double>> runs;
  std::vector<double> x;
  for (std::size_t r = 0; r < lineages.size(); ++r) {
    auto [xr, yr] = stitched_curve(lineages[r], curves[r]);
    if (r == 0) x = xr;
    if (xr != x) throw ShapeError("repeats produced curves of different shapes");
    runs.push_back(std::move(yr));
  }
  const std::string label = lineages.empty() ? "" : std::string(to_string(lineages.front().method));
  return line_chart_svg(title, "training iterations", "mean reward", {aggregate_series(label, x, runs)});
}

std::string forgetting_svg(const ForgettingTable& t) {
  std::vector<BarGroup> groups;
  for (const auto& r : t.rows) {
    BarGroup g{r.label, {}};
    for (const auto& v : r.values) g.values.push_back(v.value_or(0.0));
    groups.push_back(std::move(g));
  }
  return bar_chart_svg("Relative change in reward after the full curriculum", t.tasks, groups);
}

std::string final_eval_svg(const FinalEvalTable& t) {
  std::vector<BarGroup> groups;
  for (const auto& r : t.rows) groups.push_back({r.label, r.values});
  return bar_chart_svg("Final average reward", t.tasks, groups);
}

// ---- subcommands ----------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 0;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "Experiment config (YAML)");
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
  cmd->add_option("--workers", c.workers, "Rollout workers (1 = deterministic)");
  cmd->add_flag("--force", c.force, "Overwrite a non-empty output directory");
}

void apply_workers(const Common& c, ExperimentConfig& cfg) {
  if (c.workers > 0) cfg.train.workers = c.workers;
}

int cmd_train(const Common& c, const std::string& task_flag, const std::string& init_dir) {
  auto loaded = config_or_default(c.config);
  auto& cfg = loaded.experiment;
  apply_workers(c, cfg);
  const std::uint64_t seed = pick_seed(c.seed, loaded);
  const std::string task_name = !task_flag.empty() ? task_flag : loaded.train_task.value_or(cfg.plan.tasks.front().name);
  const TaskSpec task = task_named(task_name, cfg);
  if (cfg.train.max_iters == 0) cfg.train.max_iters = cfg.plan.tl_iters;
  cfg.train.validate();
  prepare_out(c.out, c.force);

  Pair start;
  if (!init_dir.empty()) {
    start = load_pair(init_dir, cfg);
  } else {
    const bool sighted = task.requires_terrain_features;
    start = {GaussianPolicy::create(cfg.policy_spec(sighted), derive_seed(seed, "init_policy"), cfg.train.sigma_scale,
                                    cfg.env.biped.action_bound),
             ValueFunction::create(cfg.value_spec(sighted), derive_seed(seed, "init_value"), cfg.train.gamma)};
  }
  auto result = train_task(std::move(start.policy), std::move(start.value), task, cfg.train, cfg.env,
                           derive_seed(seed, "train"), [](const CurvePoint& p) {
                             spdlog::info("iteration {} mean reward {:.4f} (std {:.4f})", p.iteration, p.mean_reward,
                                          p.std_reward);
                           });
  const fs::path out(c.out);
  save_pair({result.policy, result.value_fn}, out);
  write_text_file(out / "learning_curve.csv", result.curve.csv());
  write_text_file(out / "learning_curve.svg",
                  line_chart_svg("Learning curve: " + task.name, "training iterations", "mean reward",
                                 {curve_series(task.name, result.curve)}));
  const auto report = evaluate_policy(result.policy, task, cfg.env, cfg.eval_runs, cfg.eval_seed);
  write_text_file(out / "eval.csv", eval_report_csv({report}));
  write_text_file(out / "config.yaml", config_yaml(loaded));
  print_reports({report});
  return kOk;
}

int cmd_distill(const Common& c, const std::vector<std::string>& expert_flags, const std::string& init_dir) {
  auto loaded = config_or_default(c.config);
  auto& cfg = loaded.experiment;
  const std::uint64_t seed = pick_seed(c.seed, loaded);
  if (expert_flags.empty()) throw ConfigError("distill needs at least one --expert tasks=dir");

  ExpertAssignment experts(expert_flags.size());
  std::vector<TaskSpec> tasks;
  fs::path last_dir;
  for (const auto& flag : expert_flags) {
    const auto eq = flag.find('=');
    if (eq == std::string::npos) throw ConfigError("--expert expects tasks=dir, got '" + flag + "'");
    const fs::path dir = flag.substr(eq + 1);
    std::vector<std::string> names;
    std::string list = flag.substr(0, eq);
    for (std::size_t pos = 0; pos <= list.size();) {
      const auto comma = std::min(list.find(',', pos), list.size());
      names.push_back(list.substr(pos, comma - pos));
      pos = comma + 1;
    }
    auto pair = load_pair(dir, cfg);
    experts.add_expert(Expert{dir.string(), std::move(pair.policy), std::move(pair.value)}, names);
    for (const auto& n : names) tasks.push_back(task_named(n, cfg));
    last_dir = dir;
  }
  // The student starts from the most recently trained policy unless told otherwise.
  Pair student = load_pair(init_dir.empty() ? last_dir : fs::path(init_dir), cfg);
  for (const auto& t : tasks) {
    check_task_compatible(student.policy.net(), t);
    check_task_compatible(student.value.net(), t);
  }
  prepare_out(c.out, c.force);
  DistillConfig dc = cfg.distill;
  dc.eval_runs = cfg.eval_runs;
  dc.eval_seed = cfg.eval_seed;
  auto result = distill(experts, tasks, std::move(student.policy), std::move(student.value), dc, cfg.env,
                        derive_seed(seed, "distill"), [](const DistillCurvePoint& p) {
                          spdlog::info("update {} beta {:.3f} actor mse {:.4g} critic mse {:.4g}", p.update, p.beta,
                                       p.actor_mse, p.critic_mse);
                        });
  const fs::path out(c.out);
  save_pair({result.policy, result.value_fn}, out);
  write_text_file(out / "distill_curve.csv", result.curve.csv());
  Series actor{"actor mse", {}, {}, {}};
  for (const auto& p : result.curve.points) {
    actor.x.push_back(double(p.update));
    actor.mean.push_back(p.actor_mse);
  }
  write_text_file(out / "distill_curve.svg", line_chart_svg("Distillation loss", "updates", "action MSE", {actor}));
  write_text_file(out / "eval.csv", eval_report_csv(result.evals));
  write_text_file(out / "config.yaml", config_yaml(loaded));
  print_reports(result.evals);
  return kOk;
}

int cmd_inject(const Common& c, const std::string& in_dir) {
  auto loaded = config_or_default(c.config);
  const auto& cfg = loaded.experiment;
  const std::uint64_t seed = pick_seed(c.seed, loaded);
  const Network policy = read_checkpoint(fs::path(in_dir) / "policy.plaidckpt");
  const Network value = read_checkpoint(fs::path(in_dir) / "value.plaidckpt");
  const Network new_policy = attach_terrain_branch(policy, cfg.branch, derive_seed(seed, "inject_policy"));
  const Network new_value = attach_terrain_branch(value, cfg.branch, derive_seed(seed, "inject_value"));
  prepare_out(c.out, c.force);
  write_checkpoint(new_policy, fs::path(c.out) / "policy.plaidckpt");
  write_checkpoint(new_value, fs::path(c.out) / "value.plaidckpt");
  std::cout << "policy parameters " << policy.parameter_count() << " -> " << new_policy.parameter_count() << "\n";
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& task_name, std::size_t runs) {
  auto loaded = config_or_default(c.config);
  auto& cfg = loaded.experiment;
  const TaskSpec task = task_named(task_name, cfg);
  const std::uint64_t base_seed = c.seed.value_or(cfg.eval_seed);
  GaussianPolicy policy(read_checkpoint(policy_path(checkpoint)),
                        std::vector<float>(kActionDim, float(cfg.train.sigma_scale * cfg.env.biped.action_bound)));
  policy.set_action_bound(cfg.env.biped.action_bound);
  check_task_compatible(policy.net(), task);
  const auto report = evaluate_policy(policy, task, cfg.env, runs, base_seed);
  if (!c.out.empty()) {
    prepare_out(c.out, c.force);
    write_text_file(fs::path(c.out) / "eval.csv", eval_report_csv({report}));
  }
  print_reports({report});
  return kOk;
}

int cmd_curriculum(const Common& c, const std::string& method_flag, std::size_t repeats) {
  auto loaded = config_or_default(c.config);
  auto& cfg = loaded.experiment;
  if (!method_flag.empty()) {
    const auto m = parse_method(method_flag);
    if (!m) throw ConfigError("unknown method '" + method_flag + "' (valid: " + method_names() + ")");
    cfg.plan.method = *m;
  }
  apply_workers(c, cfg);
  cfg.validate();
  if (repeats < 1) throw ConfigError("--repeats must be >= 1");
  const std::uint64_t seed = pick_seed(c.seed, loaded);
  prepare_out(c.out, c.force);
  const fs::path out(c.out);
  write_text_file(out / "config.yaml", config_yaml(loaded));

  std::vector<PolicyLineage> lineages;
  std::vector<std::map<std::string, LearningCurve>> curves;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::uint64_t run_seed = repeats == 1 ? seed : derive_seed(seed, "repeat", r);
    const fs::path dir = repeats == 1 ? out / "lineage" : out / ("repeat_" + std::to_string(r)) / "lineage";
    RunHooks hooks;
    hooks.lineage_dir = dir;
    hooks.on_train_point = [](const std::string& node, const CurvePoint& p) {
      spdlog::info("{}: iteration {} mean reward {:.4f}", node, p.iteration, p.mean_reward);
    };
    auto result = run_curriculum(cfg, run_seed, hooks);
    // Tables come from the persisted lineage so `report` reproduces them byte for byte.
    lineages.push_back(read_lineage(dir));
    curves.push_back(std::move(result.train_curves));
  }
  const auto forgetting = forgetting_table(lineages);
  const auto final_eval = final_eval_table(lineages);
  write_text_file(out / "forgetting.csv", forgetting.csv());
  write_text_file(out / "final_eval.csv", final_eval.csv());
  write_text_file(out / "learning_curves.svg",
                  repeat_band_svg("Training reward (" + std::string(to_string(cfg.plan.method)) + ")", lineages, curves));
  write_text_file(out / "forgetting.svg", forgetting_svg(forgetting));
  write_text_file(out / "final_eval.svg", final_eval_svg(final_eval));
  std::cout << final_eval.csv();
  return kOk;
}

/// Accepts a lineage directory or a curriculum output directory.
std::vector<fs::path> lineage_dirs(const fs::path& p) {
  if (fs::exists(p / "lineage.yaml")) return {p};
  if (fs::exists(p / "lineage" / "lineage.yaml")) return {p / "lineage"};
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (fs::exists(e.path() / "lineage" / "lineage.yaml")) out.push_back(e.path() / "lineage");
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw MissingEvalError(p.string(), "no lineage found under " + p.string());
  return out;
}

int cmd_report(const Common& c, const std::vector<std::string>& inputs) {
  std::vector<PolicyLineage> lineages;
  std::vector<std::map<std::string, LearningCurve>> curves;
  for (const auto& input : inputs) {
    for (const auto& dir : lineage_dirs(input)) {
      auto lineage = read_lineage(dir);
      std::map<std::string, LearningCurve> cs;
      for (const auto& n : lineage.nodes) {
        if (fs::exists(dir / n.id / "curve.csv")) cs[n.id] = parse_curve_csv(dir / n.id / "curve.csv");
      }
      lineages.push_back(std::move(lineage));
      curves.push_back(std::move(cs));
    }
  }
  const auto forgetting = forgetting_table(lineages);
  const auto final_eval = final_eval_table(lineages);
  prepare_out(c.out, c.force);
  const fs::path out(c.out);
  write_text_file(out / "forgetting.csv", forgetting.csv());
  write_text_file(out / "final_eval.csv", final_eval.csv());
  write_text_file(out / "forgetting.svg", forgetting_svg(forgetting));
  write_text_file(out / "final_eval.svg", final_eval_svg(final_eval));
  std::vector<Series> series;
  for (std::size_t i = 0; i < lineages.size(); ++i) {
    auto [x, y] = stitched_curve(lineages[i], curves[i]);
    series.push_back({std::string(to_string(lineages[i].method)) + " #" + std::to_string(i), x, y, {}});
  }
  write_text_file(out / "learning_curves.svg", line_chart_svg("Training reward", "training iterations", "mean reward", series));
  std::cout << forgetting.csv() << final_eval.csv();
  return kOk;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const MissingEvalError& e) {
    spdlog::error("missing evaluation ({}): {}", e.node.empty() ? "lineage" : "node " + e.node, e.what());
    return kMissingEval;
  } catch (const ShapeError& e) {
    spdlog::error("{}", e.what());
    spdlog::error("hint: add the terrain branch with `plaid inject` before using this task");
    return kShape;
  } catch (const SimulationFault& e) {
    spdlog::error("simulation fault: {}", e.what());
    return kSimFault;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kBadConfig;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kBadConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Progressive learn-then-distill continual RL on a reduced-biped terrain benchmark"};
  app.require_subcommand(1);

  Common train_c, distill_c, inject_c, eval_c, cur_c, report_c;
  std::string train_task, train_init, distill_init, inject_in, eval_ckpt, eval_task, method;
  std::vector<std::string> experts, report_inputs;
  std::size_t eval_runs = 16, repeats = 1;

  auto* train = app.add_subcommand("train", "Train one task from scratch or from --init");
  add_common(train, train_c);
  train->add_option("--task", train_task, "Terrain task (default: train.task or the first plan task)");
  train->add_option("--init", train_init, "Directory with policy/value checkpoints to start from");

  auto* dist = app.add_subcommand("distill", "Distil experts into one student");
  add_common(dist, distill_c);
  dist->add_option("--expert", experts, "tasks=dir, e.g. flat,incline=runs/consolidated")->required();
  dist->add_option("--init", distill_init, "Student initialization (default: the last expert)");

  auto* inj = app.add_subcommand("inject", "Attach the terrain branch to a policy/value pair");
  add_common(inj, inject_c);
  inj->add_option("--in", inject_in, "Directory with policy/value checkpoints")->required();

  auto* cur = app.add_subcommand("curriculum", "Run a full curriculum and write its lineage");
  add_common(cur, cur_c);
  cur->add_option("--method", method, "plaid, multitasker, parallel or tl_only (default: plan.method)");
  cur->add_option("--repeats", repeats, "Independent seed-derived runs");

  auto* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint on one task");
  add_common(ev, eval_c, false);
  ev->add_option("--checkpoint", eval_ckpt, "Policy checkpoint or directory")->required();
  ev->add_option("--task", eval_task, "Terrain task")->required();
  ev->add_option("--runs", eval_runs, "Evaluation episodes");

  auto* rep = app.add_subcommand("report", "Forgetting and final-evaluation tables for lineages");
  add_common(rep, report_c);
  rep->add_option("lineages", report_inputs, "Lineage or curriculum output directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadConfig;
  }

  if (*train) return guarded([&] { return cmd_train(train_c, train_task, train_init); });
  if (*dist) return guarded([&] { return cmd_distill(distill_c, experts, distill_init); });
  if (*inj) return guarded([&] { return cmd_inject(inject_c, inject_in); });
  if (*cur) return guarded([&] { return cmd_curriculum(cur_c, method, repeats); });
  if (*ev) return guarded([&] { return cmd_eval(eval_c, eval_ckpt, eval_task, eval_runs); });
  if (*rep) return guarded([&] { return cmd_report(report_c, report_inputs); });
  return kFailure;
}
