#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plaid/terrain.hpp"

namespace plaid {

inline constexpr std::size_t kJoints = 11;
inline constexpr std::size_t kActionDim = kJoints;
inline constexpr std::size_t kStateDim = 50;

using JointVector = std::array<double, kJoints>;

/// Joint order: hip L/R, knee L/R, ankle L/R, shoulder L/R, elbow L/R, neck.
struct BipedConfig {
  double kp = 30.0;
  double kd = 5.0;
  double dt_s = 1.0 / 30.0;
  double gait_period_s = 1.0;
  double v_base_mps = 0.6;
  double target_speed_mps = 1.0;
  double fall_limit_rad = 3.0;
  double start_x_m = 0.5;
  double action_bound = 1.0;

  JointVector torque_limit{150, 150, 125, 125, 100, 100, 100, 100, 75, 75, 50};
  /// Reference gait q_ref,i(phase) = amplitude_i * sin(2 pi (phase + offset_i)).
  JointVector gait_amplitude{0.5, 0.5, 0.6, 0.6, 0.3, 0.3, 0.3, 0.3, 0.2, 0.2, 0.05};
  JointVector gait_offset{0.0, 0.5, 0.25, 0.75, 0.1, 0.6, 0.5, 0.0, 0.75, 0.25, 0.0};
  /// v_x = max(0, v_base + velocity_readout . qdot) * (1 - grade_penalty_scale * penalty)
  JointVector velocity_readout{0.05, 0.05, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  /// Clearance margin u . q compared against step-edge heights.
  JointVector clearance_readout{0, 0, 0.5, 0.5, 0, 0, 0, 0, 0, 0, 0};
  /// |stride . q| compared against gap widths.
  JointVector stride_readout{0.5, -0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  /// penalty = clamp(grade - lean . q, 0, 1); all-zero lean makes it a constant grade penalty.
  JointVector lean_readout{0, 0, 0, 0, 0, 0, 0.5, 0.5, 0, 0, 1.0};
  double grade_penalty_scale = 0.5;

  double reward_velocity_weight = 0.5;
  double reward_pose_weight = 0.4;
  double reward_torque_weight = 0.1;
  double velocity_sharpness = 2.0;
  double pose_sharpness = 0.5;
  double pose_velocity_weight = 0.1;

  void validate() const;
};

struct EnvConfig {
  BipedConfig biped;
  TerrainConfig terrain;
  void validate() const {
    biped.validate();
    terrain.validate();
  }
};

/// Terrain task definition. Tasks that need terrain features can only be run
/// by a network with a terrain branch.
struct TaskSpec {
  std::string name;
  TerrainKind terrain = TerrainKind::flat;
  std::size_t episode_limit = 3000;
  bool requires_terrain_features = false;

  static TaskSpec for_kind(TerrainKind kind, std::size_t episode_limit = 3000);
};

struct CharacterState {
  JointVector q{};
  JointVector qdot{};
  double phase = 0.0;  // [0, 1)
  double x = 0.0;      // root position, metres
  double v_x = 0.0;
};

JointVector reference_pose(const BipedConfig& cfg, double phase);
JointVector reference_velocity(const BipedConfig& cfg, double phase);

double dot(const JointVector& a, const JointVector& b);

/// Layout: q(11), qdot/10(11), q_ref(11), qdot_ref/10(11), sin 2 pi phase,
/// cos 2 pi phase, v_x, clearance margin, local grade, target speed.
std::vector<float> observe(const CharacterState& s, const Terrain& terrain, const BipedConfig& cfg);

/// PD torque clipped to the joint limits.
JointVector pd_torque(const BipedConfig& cfg, const CharacterState& s, std::span<const double> action);

/// In [0, 1] for every state and admissible action.
double reward(const BipedConfig& cfg, const CharacterState& s, const JointVector& torque);

enum class Failure { none, step_edge, gap, fall };
std::string_view to_string(Failure f);

struct StepResult {
  CharacterState next;
  double reward = 0.0;
  JointVector torque{};
  Failure failure = Failure::none;
  bool out_of_terrain = false;  // window would run past the terrain end
};

/// Pure function of (state, action, terrain). Throws SimulationFault on a
/// non-finite state.
StepResult step(const CharacterState& s, std::span<const double> action, const Terrain& terrain,
                const EnvConfig& cfg);

CharacterState initial_state(const BipedConfig& cfg, Rng& rng);

struct Observation {
  std::vector<float> state;
  std::vector<float> window;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;   // failure: no bootstrapping past this step
  bool truncated = false;  // episode limit or terrain end
  bool done() const { return terminal || truncated; }
};

/// Episodic environment interface used by training, distillation and evaluation.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t episode_seed) = 0;
  virtual StepOutcome step(std::span<const float> action) = 0;
  virtual std::size_t episode_limit() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

class BipedEnv final : public Environment {
 public:
  BipedEnv(TaskSpec task, EnvConfig cfg);

  Observation reset(std::uint64_t episode_seed) override;
  StepOutcome step(std::span<const float> action) override;
  std::size_t episode_limit() const override { return task_.episode_limit; }
  std::unique_ptr<Environment> clone() const override;

  const TaskSpec& task() const { return task_; }
  const EnvConfig& config() const { return cfg_; }
  const Terrain& terrain() const { return terrain_; }
  const CharacterState& state() const { return state_; }
  std::size_t t() const { return t_; }
  Failure last_failure() const { return last_failure_; }
  Observation observation() const;

 private:
  TaskSpec task_;
  EnvConfig cfg_;
  Terrain terrain_;
  CharacterState state_;
  std::size_t t_ = 0;
  Failure last_failure_ = Failure::none;
};

/// CSV `t,x,phase,reward,done` for one episode driven by `actions`.
struct EpisodeLogRow {
  std::size_t t;
  double x;
  double phase;
  double reward;
  bool done;
};
std::string episode_log_csv(const std::vector<EpisodeLogRow>& rows);

}  // namespace plaid
