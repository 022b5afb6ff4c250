#include "plaid/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "plaid/error.hpp"

namespace plaid {

namespace {

std::string where(const std::string& source, const YAML::Mark& mark) {
  if (mark.is_null()) return source + ": ";
  return source + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1) + ": ";
}

/// Reads one mapping section against a table of known keys.
class Section {
 public:
  using Reader = std::function<void(const YAML::Node&)>;

  Section(std::string name, std::string source) : name_(std::move(name)), source_(std::move(source)) {}

  template <typename T>
  Section& value(const std::string& key, T& target) {
    readers_[key] = [this, &target, key](const YAML::Node& n) {
      try {
        target = n.as<T>();
      } catch (const YAML::Exception&) {
        fail(n, "bad value for " + qualified(key));
      }
    };
    return *this;
  }

  template <typename T, std::size_t N>
  Section& array(const std::string& key, std::array<T, N>& target) {
    readers_[key] = [this, &target, key](const YAML::Node& n) {
      std::vector<T> v;
      try {
        v = n.as<std::vector<T>>();
      } catch (const YAML::Exception&) {
        fail(n, "bad value for " + qualified(key));
      }
      if (v.size() != N) fail(n, qualified(key) + " needs " + std::to_string(N) + " entries, found " + std::to_string(v.size()));
      std::copy(v.begin(), v.end(), target.begin());
    };
    return *this;
  }

  Section& custom(const std::string& key, Reader r) {
    readers_[key] = std::move(r);
    return *this;
  }

  void read(const YAML::Node& node) const {
    if (!node) return;
    if (!node.IsMap()) fail(node, "section " + name_ + " must be a mapping");
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      const auto it = readers_.find(key);
      if (it == readers_.end()) fail(kv.first, "unknown key '" + key + "' in section " + name_);
      it->second(kv.second);
    }
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
    throw ConfigError(where(source_, n.Mark()) + what);
  }

  std::string qualified(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  std::string source_;
  std::map<std::string, Reader> readers_;
};

std::size_t task_index(const CurriculumPlan& plan, const std::string& name) {
  for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
    if (plan.tasks[i].name == name) return i;
  }
  return plan.tasks.size();
}

}  // namespace

LoadedConfig parse_config(std::string_view text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(source, e.mark) + e.msg);
  }
  LoadedConfig out;
  if (!root || root.IsNull()) return out;
  if (!root.IsMap()) throw ConfigError(where(source, root.Mark()) + "top level must be a mapping");

  ExperimentConfig& c = out.experiment;
  auto& plan = c.plan;
  std::vector<std::string> task_names;
  std::optional<std::string> injection_after;
  std::size_t episode_limit = 3000;
  std::string method = std::string(to_string(plan.method));
  bool tasks_given = false;

  Section plan_s("plan", source);
  plan_s.value("method", method)
      .custom("tasks",
              [&](const YAML::Node& n) {
                try {
                  task_names = n.as<std::vector<std::string>>();
                } catch (const YAML::Exception&) {
                  plan_s.fail(n, "plan.tasks must be a list of terrain names");
                }
                for (const auto& t : task_names) {
                  if (!parse_terrain_kind(t)) plan_s.fail(n, "unknown terrain '" + t + "' in plan.tasks");
                }
                tasks_given = true;
              })
      .value("tl_iters", plan.tl_iters)
      .value("distill_updates", plan.distill_updates)
      .custom("injection_after", [&](const YAML::Node& n) { injection_after = n.as<std::string>(); })
      .value("terminal_distill", plan.terminal_distill)
      .value("episode_limit_steps", episode_limit);

  Section net_s("network", source);
  auto& br = c.branch;
  Section branch_s("network.terrain_branch", source);
  branch_s.value("window_samples", br.window)
      .value("filters", br.filters)
      .value("filter_width", br.filter_width)
      .value("dense_units", br.dense_units);
  net_s.value("hidden_widths", c.hidden_widths).custom("terrain_branch", [&](const YAML::Node& n) { branch_s.read(n); });

  auto& tr = c.train;
  Section train_s("train", source);
  train_s.value("gamma", tr.gamma)
      .value("actor_lr", tr.actor_lr)
      .value("critic_lr", tr.critic_lr)
      .value("momentum", tr.momentum)
      .value("batch", tr.batch)
      .value("buffer_capacity", tr.buffer_capacity)
      .value("epsilon_start", tr.epsilon_start)
      .value("epsilon_end", tr.epsilon_end)
      .value("epsilon_anneal_iters", tr.epsilon_anneal_iters)
      .value("max_iters", tr.max_iters)
      .value("eval_interval_iters", tr.eval_interval)
      .value("eval_runs", tr.eval_runs)
      .value("update_on_greedy", tr.update_on_greedy)
      .value("sigma_scale", tr.sigma_scale)
      .value("workers", tr.workers)
      .value("worker_chunk_steps", tr.worker_chunk)
      .custom("task", [&](const YAML::Node& n) {
        out.train_task = n.as<std::string>();
        if (!parse_terrain_kind(*out.train_task)) train_s.fail(n, "unknown terrain '" + *out.train_task + "' in train.task");
      });

  auto& di = c.distill;
  Section distill_s("distill", source);
  distill_s.value("updates", di.updates)
      .value("anneal_updates", di.anneal_updates)
      .value("batch", di.batch)
      .value("buffer_capacity", di.buffer_capacity)
      .value("steps_per_update", di.steps_per_update)
      .value("actor_lr", di.actor_lr)
      .value("critic_lr", di.critic_lr)
      .value("momentum", di.momentum)
      .value("curve_interval_updates", di.curve_interval);

  Section eval_s("evaluation", source);
  eval_s.value("runs", c.eval_runs).value("seed", c.eval_seed);

  auto& b = c.env.biped;
  Section biped_s("env.biped", source);
  biped_s.value("kp", b.kp)
      .value("kd", b.kd)
      .value("dt_s", b.dt_s)
      .value("gait_period_s", b.gait_period_s)
      .value("v_base_mps", b.v_base_mps)
      .value("target_speed_mps", b.target_speed_mps)
      .value("fall_limit_rad", b.fall_limit_rad)
      .value("start_x_m", b.start_x_m)
      .value("action_bound", b.action_bound)
      .array("torque_limit_nm", b.torque_limit)
      .array("gait_amplitude_rad", b.gait_amplitude)
      .array("gait_offset_cycles", b.gait_offset)
      .array("velocity_readout_m_per_rad", b.velocity_readout)
      .array("clearance_readout_m_per_rad", b.clearance_readout)
      .array("stride_readout_m_per_rad", b.stride_readout)
      .array("lean_readout_per_rad", b.lean_readout)
      .value("grade_penalty_scale", b.grade_penalty_scale)
      .value("reward_velocity_weight", b.reward_velocity_weight)
      .value("reward_pose_weight", b.reward_pose_weight)
      .value("reward_torque_weight", b.reward_torque_weight)
      .value("velocity_sharpness", b.velocity_sharpness)
      .value("pose_sharpness", b.pose_sharpness)
      .value("pose_velocity_weight", b.pose_velocity_weight);

  auto& t = c.env.terrain;
  Section terrain_s("env.terrain", source);
  terrain_s.value("length_m", t.length_m)
      .value("grid_m", t.grid_m)
      .value("window_samples", t.window_samples)
      .value("window_stride_cells", t.window_stride_cells)
      .value("incline_deg_min", t.incline_deg_min)
      .value("incline_deg_max", t.incline_deg_max)
      .value("step_width_m_min", t.step_width_m_min)
      .value("step_width_m_max", t.step_width_m_max)
      .value("step_height_m_min", t.step_height_m_min)
      .value("step_height_m_max", t.step_height_m_max)
      .value("slope_delta_deg_min", t.slope_delta_deg_min)
      .value("slope_delta_deg_max", t.slope_delta_deg_max)
      .value("slope_limit_deg", t.slope_limit_deg)
      .value("slope_segment_m", t.slope_segment_m)
      .value("gap_width_m_min", t.gap_width_m_min)
      .value("gap_width_m_max", t.gap_width_m_max)
      .value("gap_flat_m_min", t.gap_flat_m_min)
      .value("gap_flat_m_max", t.gap_flat_m_max)
      .value("gap_depth_m", t.gap_depth_m)
      .value("mixed_segment_m", t.mixed_segment_m);

  Section env_s("env", source);
  env_s.custom("biped", [&](const YAML::Node& n) { biped_s.read(n); })
      .custom("terrain", [&](const YAML::Node& n) { terrain_s.read(n); });

  Section top("config", source);
  top.custom("seed",
             [&](const YAML::Node& n) {
               try {
                 out.seed = n.as<std::uint64_t>();
               } catch (const YAML::Exception&) {
                 top.fail(n, "seed must be a non-negative integer");
               }
             })
      .custom("plan", [&](const YAML::Node& n) { plan_s.read(n); })
      .custom("network", [&](const YAML::Node& n) { net_s.read(n); })
      .custom("train", [&](const YAML::Node& n) { train_s.read(n); })
      .custom("distill", [&](const YAML::Node& n) { distill_s.read(n); })
      .custom("evaluation", [&](const YAML::Node& n) { eval_s.read(n); })
      .custom("env", [&](const YAML::Node& n) { env_s.read(n); });
  top.read(root);

  const auto m = parse_method(method);
  if (!m) {
    throw ConfigError(where(source, root["plan"]["method"].Mark()) + "unknown method '" + method +
                      "' (valid: " + method_names() + ")");
  }
  plan.method = *m;
  if (tasks_given) {
    plan.tasks.clear();
    for (const auto& name : task_names) plan.tasks.push_back(TaskSpec::for_kind(*parse_terrain_kind(name), episode_limit));
  } else {
    plan.tasks = CurriculumPlan::default_tasks(episode_limit);
  }
  if (injection_after) {
    if (*injection_after == "none") {
      plan.injection_after.reset();
    } else {
      const auto idx = task_index(plan, *injection_after);
      if (idx == plan.tasks.size()) {
        throw ConfigError(where(source, root["plan"]["injection_after"].Mark()) + "plan.injection_after names task '" +
                          *injection_after + "' which is not in plan.tasks");
      }
      plan.injection_after = idx;
    }
  } else {
    // Default: inject after the second task, or earlier if a sighted task comes sooner.
    std::size_t first_sighted = plan.tasks.size();
    for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
      if (plan.tasks[i].requires_terrain_features) {
        first_sighted = i;
        break;
      }
    }
    if (first_sighted == 0) {
      plan.injection_after.reset();
    } else {
      plan.injection_after = std::min<std::size_t>(1, first_sighted - 1);
    }
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot read config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_yaml(const LoadedConfig& cfg) {
  const auto& c = cfg.experiment;
  YAML::Emitter e;
  auto flow = [&](const auto& arr) {
    e << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : arr) e << v;
    e << YAML::EndSeq;
  };
  e << YAML::BeginMap;
  if (cfg.seed) e << YAML::Key << "seed" << YAML::Value << *cfg.seed;

  e << YAML::Key << "plan" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "method" << YAML::Value << std::string(to_string(c.plan.method));
  e << YAML::Key << "tasks" << YAML::Value;
  std::vector<std::string> names;
  for (const auto& t : c.plan.tasks) names.push_back(t.name);
  flow(names);
  e << YAML::Key << "tl_iters" << YAML::Value << c.plan.tl_iters;
  e << YAML::Key << "distill_updates" << YAML::Value << c.plan.distill_updates;
  e << YAML::Key << "injection_after" << YAML::Value
    << (c.plan.injection_after ? c.plan.tasks[*c.plan.injection_after].name : std::string("none"));
  e << YAML::Key << "terminal_distill" << YAML::Value << c.plan.terminal_distill;
  e << YAML::Key << "episode_limit_steps" << YAML::Value << c.plan.tasks.front().episode_limit;
  e << YAML::EndMap;

  e << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "hidden_widths" << YAML::Value;
  flow(c.hidden_widths);
  e << YAML::Key << "terrain_branch" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "window_samples" << YAML::Value << c.branch.window;
  e << YAML::Key << "filters" << YAML::Value << c.branch.filters;
  e << YAML::Key << "filter_width" << YAML::Value << c.branch.filter_width;
  e << YAML::Key << "dense_units" << YAML::Value << c.branch.dense_units;
  e << YAML::EndMap << YAML::EndMap;

  const auto& tr = c.train;
  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  if (cfg.train_task) e << YAML::Key << "task" << YAML::Value << *cfg.train_task;
  e << YAML::Key << "gamma" << YAML::Value << tr.gamma;
  e << YAML::Key << "actor_lr" << YAML::Value << tr.actor_lr;
  e << YAML::Key << "critic_lr" << YAML::Value << tr.critic_lr;
  e << YAML::Key << "momentum" << YAML::Value << tr.momentum;
  e << YAML::Key << "batch" << YAML::Value << tr.batch;
  e << YAML::Key << "buffer_capacity" << YAML::Value << tr.buffer_capacity;
  e << YAML::Key << "epsilon_start" << YAML::Value << tr.epsilon_start;
  e << YAML::Key << "epsilon_end" << YAML::Value << tr.epsilon_end;
  e << YAML::Key << "epsilon_anneal_iters" << YAML::Value << tr.epsilon_anneal_iters;
  e << YAML::Key << "max_iters" << YAML::Value << tr.max_iters;
  e << YAML::Key << "eval_interval_iters" << YAML::Value << tr.eval_interval;
  e << YAML::Key << "eval_runs" << YAML::Value << tr.eval_runs;
  e << YAML::Key << "update_on_greedy" << YAML::Value << tr.update_on_greedy;
  e << YAML::Key << "sigma_scale" << YAML::Value << tr.sigma_scale;
  e << YAML::Key << "workers" << YAML::Value << tr.workers;
  e << YAML::Key << "worker_chunk_steps" << YAML::Value << tr.worker_chunk;
  e << YAML::EndMap;

  const auto& di = c.distill;
  e << YAML::Key << "distill" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "updates" << YAML::Value << di.updates;
  e << YAML::Key << "anneal_updates" << YAML::Value << di.anneal_updates;
  e << YAML::Key << "batch" << YAML::Value << di.batch;
  e << YAML::Key << "buffer_capacity" << YAML::Value << di.buffer_capacity;
  e << YAML::Key << "steps_per_update" << YAML::Value << di.steps_per_update;
  e << YAML::Key << "actor_lr" << YAML::Value << di.actor_lr;
  e << YAML::Key << "critic_lr" << YAML::Value << di.critic_lr;
  e << YAML::Key << "momentum" << YAML::Value << di.momentum;
  e << YAML::Key << "curve_interval_updates" << YAML::Value << di.curve_interval;
  e << YAML::EndMap;

  e << YAML::Key << "evaluation" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "runs" << YAML::Value << c.eval_runs;
  e << YAML::Key << "seed" << YAML::Value << c.eval_seed;
  e << YAML::EndMap;

  const auto& b = c.env.biped;
  const auto& t = c.env.terrain;
  e << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "biped" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kp" << YAML::Value << b.kp;
  e << YAML::Key << "kd" << YAML::Value << b.kd;
  e << YAML::Key << "dt_s" << YAML::Value << b.dt_s;
  e << YAML::Key << "gait_period_s" << YAML::Value << b.gait_period_s;
  e << YAML::Key << "v_base_mps" << YAML::Value << b.v_base_mps;
  e << YAML::Key << "target_speed_mps" << YAML::Value << b.target_speed_mps;
  e << YAML::Key << "fall_limit_rad" << YAML::Value << b.fall_limit_rad;
  e << YAML::Key << "start_x_m" << YAML::Value << b.start_x_m;
  e << YAML::Key << "action_bound" << YAML::Value << b.action_bound;
  e << YAML::Key << "torque_limit_nm" << YAML::Value;
  flow(b.torque_limit);
  e << YAML::Key << "gait_amplitude_rad" << YAML::Value;
  flow(b.gait_amplitude);
  e << YAML::Key << "gait_offset_cycles" << YAML::Value;
  flow(b.gait_offset);
  e << YAML::Key << "velocity_readout_m_per_rad" << YAML::Value;
  flow(b.velocity_readout);
  e << YAML::Key << "clearance_readout_m_per_rad" << YAML::Value;
  flow(b.clearance_readout);
  e << YAML::Key << "stride_readout_m_per_rad" << YAML::Value;
  flow(b.stride_readout);
  e << YAML::Key << "lean_readout_per_rad" << YAML::Value;
  flow(b.lean_readout);
  e << YAML::Key << "grade_penalty_scale" << YAML::Value << b.grade_penalty_scale;
  e << YAML::Key << "reward_velocity_weight" << YAML::Value << b.reward_velocity_weight;
  e << YAML::Key << "reward_pose_weight" << YAML::Value << b.reward_pose_weight;
  e << YAML::Key << "reward_torque_weight" << YAML::Value << b.reward_torque_weight;
  e << YAML::Key << "velocity_sharpness" << YAML::Value << b.velocity_sharpness;
  e << YAML::Key << "pose_sharpness" << YAML::Value << b.pose_sharpness;
  e << YAML::Key << "pose_velocity_weight" << YAML::Value << b.pose_velocity_weight;
  e << YAML::EndMap;
  e << YAML::Key << "terrain" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "length_m" << YAML::Value << t.length_m;
  e << YAML::Key << "grid_m" << YAML::Value << t.grid_m;
  e << YAML::Key << "window_samples" << YAML::Value << t.window_samples;
  e << YAML::Key << "window_stride_cells" << YAML::Value << t.window_stride_cells;
  e << YAML::Key << "incline_deg_min" << YAML::Value << t.incline_deg_min;
  e << YAML::Key << "incline_deg_max" << YAML::Value << t.incline_deg_max;
  e << YAML::Key << "step_width_m_min" << YAML::Value << t.step_width_m_min;
  e << YAML::Key << "step_width_m_max" << YAML::Value << t.step_width_m_max;
  e << YAML::Key << "step_height_m_min" << YAML::Value << t.step_height_m_min;
  e << YAML::Key << "step_height_m_max" << YAML::Value << t.step_height_m_max;
  e << YAML::Key << "slope_delta_deg_min" << YAML::Value << t.slope_delta_deg_min;
  e << YAML::Key << "slope_delta_deg_max" << YAML::Value << t.slope_delta_deg_max;
  e << YAML::Key << "slope_limit_deg" << YAML::Value << t.slope_limit_deg;
  e << YAML::Key << "slope_segment_m" << YAML::Value << t.slope_segment_m;
  e << YAML::Key << "gap_width_m_min" << YAML::Value << t.gap_width_m_min;
  e << YAML::Key << "gap_width_m_max" << YAML::Value << t.gap_width_m_max;
  e << YAML::Key << "gap_flat_m_min" << YAML::Value << t.gap_flat_m_min;
  e << YAML::Key << "gap_flat_m_max" << YAML::Value << t.gap_flat_m_max;
  e << YAML::Key << "gap_depth_m" << YAML::Value << t.gap_depth_m;
  e << YAML::Key << "mixed_segment_m" << YAML::Value << t.mixed_segment_m;
  e << YAML::EndMap << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace plaid
