#include "plaid/biped.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"

namespace plaid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool finite(const CharacterState& s) {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(s.q.begin(), s.q.end(), ok) && std::all_of(s.qdot.begin(), s.qdot.end(), ok) &&
         ok(s.phase) && ok(s.x) && ok(s.v_x);
}

}  // namespace

void BipedConfig::validate() const {
  if (!(dt_s > 0.0) || !(gait_period_s > 0.0)) throw ConfigError("biped dt_s and gait_period_s must be positive");
  if (!(kp >= 0.0) || !(kd >= 0.0)) throw ConfigError("biped gains must be non-negative");
  if (!(action_bound > 0.0)) throw ConfigError("biped action_bound must be positive");
  for (double lim : torque_limit) {
    if (!(lim > 0.0)) throw ConfigError("biped torque limits must be positive");
  }
  const double wsum = reward_velocity_weight + reward_pose_weight + reward_torque_weight;
  if (reward_velocity_weight < 0 || reward_pose_weight < 0 || reward_torque_weight < 0 ||
      std::abs(wsum - 1.0) > 1e-9) {
    throw ConfigError("biped reward weights must be non-negative and sum to 1");
  }
}

TaskSpec TaskSpec::for_kind(TerrainKind kind, std::size_t episode_limit) {
  TaskSpec t;
  t.name = std::string(to_string(kind));
  t.terrain = kind;
  t.episode_limit = episode_limit;
  t.requires_terrain_features = kind != TerrainKind::flat && kind != TerrainKind::incline;
  return t;
}

double dot(const JointVector& a, const JointVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kJoints; ++i) s += a[i] * b[i];
  return s;
}

JointVector reference_pose(const BipedConfig& cfg, double phase) {
  JointVector q{};
  for (std::size_t i = 0; i < kJoints; ++i) {
    q[i] = cfg.gait_amplitude[i] * std::sin(kTwoPi * (phase + cfg.gait_offset[i]));
  }
  return q;
}

JointVector reference_velocity(const BipedConfig& cfg, double phase) {
  JointVector v{};
  const double rate = kTwoPi / cfg.gait_period_s;
  for (std::size_t i = 0; i < kJoints; ++i) {
    v[i] = cfg.gait_amplitude[i] * rate * std::cos(kTwoPi * (phase + cfg.gait_offset[i]));
  }
  return v;
}

std::vector<float> observe(const CharacterState& s, const Terrain& terrain, const BipedConfig& cfg) {
  std::vector<float> out;
  out.reserve(kStateDim);
  const auto q_ref = reference_pose(cfg, s.phase);
  const auto v_ref = reference_velocity(cfg, s.phase);
  for (double v : s.q) out.push_back(float(v));
  for (double v : s.qdot) out.push_back(float(v / 10.0));
  for (double v : q_ref) out.push_back(float(v));
  for (double v : v_ref) out.push_back(float(v / 10.0));
  out.push_back(float(std::sin(kTwoPi * s.phase)));
  out.push_back(float(std::cos(kTwoPi * s.phase)));
  out.push_back(float(s.v_x));
  out.push_back(float(dot(cfg.clearance_readout, s.q)));
  out.push_back(float(terrain.grade_at(s.x)));
  out.push_back(float(cfg.target_speed_mps));
  return out;
}

JointVector pd_torque(const BipedConfig& cfg, const CharacterState& s, std::span<const double> action) {
  if (action.size() != kJoints) throw ShapeError("action must have 11 entries");
  JointVector tau{};
  for (std::size_t i = 0; i < kJoints; ++i) {
    const double raw = cfg.kp * (action[i] - s.q[i]) - cfg.kd * s.qdot[i];
    tau[i] = std::clamp(raw, -cfg.torque_limit[i], cfg.torque_limit[i]);
  }
  return tau;
}

double reward(const BipedConfig& cfg, const CharacterState& s, const JointVector& torque) {
  const double dv = s.v_x - cfg.target_speed_mps;
  const double velocity_term = std::exp(-cfg.velocity_sharpness * dv * dv);

  const auto q_ref = reference_pose(cfg, s.phase);
  const auto v_ref = reference_velocity(cfg, s.phase);
  double pose_err = 0.0, vel_err = 0.0;
  for (std::size_t i = 0; i < kJoints; ++i) {
    pose_err += (s.q[i] - q_ref[i]) * (s.q[i] - q_ref[i]);
    vel_err += (s.qdot[i] - v_ref[i]) * (s.qdot[i] - v_ref[i]);
  }
  const double pose_term = std::exp(-cfg.pose_sharpness * (pose_err + cfg.pose_velocity_weight * vel_err));

  double tau2 = 0.0, lim2 = 0.0;
  for (std::size_t i = 0; i < kJoints; ++i) {
    tau2 += torque[i] * torque[i];
    lim2 += cfg.torque_limit[i] * cfg.torque_limit[i];
  }
  const double torque_term = std::max(0.0, 1.0 - tau2 / lim2);

  return cfg.reward_velocity_weight * velocity_term + cfg.reward_pose_weight * pose_term +
         cfg.reward_torque_weight * torque_term;
}

std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::none: return "none";
    case Failure::step_edge: return "step_edge";
    case Failure::gap: return "gap";
    case Failure::fall: return "fall";
  }
  return "unknown";
}

StepResult step(const CharacterState& s, std::span<const double> action, const Terrain& terrain,
                const EnvConfig& env) {
  const auto& cfg = env.biped;
  if (!finite(s)) throw SimulationFault("non-finite character state");
  for (double a : action) {
    if (!std::isfinite(a)) throw SimulationFault("non-finite action");
  }

  StepResult out;
  out.torque = pd_torque(cfg, s, action);
  CharacterState& n = out.next;
  for (std::size_t i = 0; i < kJoints; ++i) {
    n.qdot[i] = s.qdot[i] + out.torque[i] * cfg.dt_s;  // unit inertia
    n.q[i] = s.q[i] + n.qdot[i] * cfg.dt_s;
  }
  n.phase = s.phase + cfg.dt_s / cfg.gait_period_s;
  n.phase -= std::floor(n.phase);

  const double penalty = std::clamp(terrain.grade_at(s.x) - dot(cfg.lean_readout, n.q), 0.0, 1.0);
  n.v_x = std::max(0.0, cfg.v_base_mps + dot(cfg.velocity_readout, n.qdot)) *
          (1.0 - cfg.grade_penalty_scale * penalty);
  n.x = s.x + n.v_x * cfg.dt_s;

  const double clearance = dot(cfg.clearance_readout, n.q);
  auto edge = std::upper_bound(terrain.edges.begin(), terrain.edges.end(), s.x,
                               [](double x, const StepEdge& e) { return x < e.x; });
  for (; edge != terrain.edges.end() && edge->x <= n.x; ++edge) {
    if (edge->height > clearance) {
      out.failure = Failure::step_edge;
      break;
    }
  }
  if (out.failure == Failure::none) {
    const double stride = std::abs(dot(cfg.stride_readout, n.q));
    auto gap = std::upper_bound(terrain.gaps.begin(), terrain.gaps.end(), s.x,
                                [](double x, const GapInterval& g) { return x < g.start; });
    if (gap != terrain.gaps.end() && gap->start <= n.x) {
      if (stride < gap->width()) {
        out.failure = Failure::gap;
      } else {
        n.x = std::max(n.x, gap->end);
      }
    }
  }
  if (out.failure == Failure::none) {
    for (double q : n.q) {
      if (std::abs(q) > cfg.fall_limit_rad) {
        out.failure = Failure::fall;
        break;
      }
    }
  }
  if (!finite(n)) throw SimulationFault("simulation produced a non-finite state");

  out.out_of_terrain =
      terrain.cell_of(n.x) + env.terrain.window_samples * env.terrain.window_stride_cells >=
      terrain.heights.size() - 1;
  out.reward = reward(cfg, n, out.torque);
  return out;
}

CharacterState initial_state(const BipedConfig& cfg, Rng& rng) {
  CharacterState s;
  s.phase = uniform(rng, 0.0, 1.0);
  s.q = reference_pose(cfg, s.phase);
  s.qdot = reference_velocity(cfg, s.phase);
  s.x = cfg.start_x_m;
  s.v_x = cfg.v_base_mps;
  return s;
}

BipedEnv::BipedEnv(TaskSpec task, EnvConfig cfg) : task_(std::move(task)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (task_.episode_limit < 1) throw ConfigError("task episode_limit must be >= 1");
}

Observation BipedEnv::observation() const {
  // A truncated final state may sit closer to the end than the lookahead.
  const std::size_t reach = cfg_.terrain.window_samples * cfg_.terrain.window_stride_cells;
  const double max_x = terrain_.grid_m * double(terrain_.heights.size() - 1 - reach);
  return {observe(state_, terrain_, cfg_.biped),
          terrain_window(terrain_, std::min(state_.x, max_x), cfg_.terrain)};
}

Observation BipedEnv::reset(std::uint64_t episode_seed) {
  Rng rng = make_rng(episode_seed);
  terrain_ = gen_terrain(task_.terrain, rng, cfg_.terrain);
  state_ = initial_state(cfg_.biped, rng);
  t_ = 0;
  last_failure_ = Failure::none;
  return observation();
}

StepOutcome BipedEnv::step(std::span<const float> action) {
  if (action.size() != kActionDim) throw ShapeError("action must have 11 entries");
  std::array<double, kActionDim> a{};
  for (std::size_t i = 0; i < kActionDim; ++i) {
    a[i] = std::clamp(double(action[i]), -cfg_.biped.action_bound, cfg_.biped.action_bound);
  }
  const auto r = plaid::step(state_, a, terrain_, cfg_);
  state_ = r.next;
  ++t_;
  last_failure_ = r.failure;

  StepOutcome out;
  out.reward = r.reward;
  out.terminal = r.failure != Failure::none;
  out.truncated = !out.terminal && (t_ >= task_.episode_limit || r.out_of_terrain);
  out.observation = observation();
  return out;
}

std::unique_ptr<Environment> BipedEnv::clone() const { return std::make_unique<BipedEnv>(*this); }

std::string episode_log_csv(const std::vector<EpisodeLogRow>& rows) {
  CsvWriter csv{"t", "x", "phase", "reward", "done"};
  for (const auto& r : rows) {
    csv.cell(r.t).cell(r.x).cell(r.phase).cell(r.reward).cell(r.done ? 1 : 0).end_row();
  }
  return csv.str();
}

}  // namespace plaid
