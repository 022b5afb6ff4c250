#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "plaid/biped.hpp"

namespace plaid {

/// Maps an observation to an 11-D action.
using ActionFn = std::function<std::vector<float>(const Observation&)>;

struct EvalReport {
  std::string task;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> episode_seeds;
  std::vector<double> episode_rewards;  // mean step reward per episode
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  void summarize();
};

/// Terrain seeds used for `n_runs` evaluation episodes of a task. Identical for
/// every policy evaluated with the same base seed.
std::vector<std::uint64_t> evaluation_seeds(std::string_view task, std::uint64_t base_seed,
                                            std::size_t n_runs);

/// Mean step reward over the episode horizon: rewards summed over the executed
/// steps and divided by the episode limit, so steps lost to an early failure
/// count as zero.
double run_episode(const ActionFn& act, Environment& env, std::uint64_t episode_seed,
                   std::vector<EpisodeLogRow>* log = nullptr);

EvalReport evaluate(const ActionFn& act, Environment& env, std::string_view task_name,
                    std::size_t n_runs, std::uint64_t base_seed);

/// CSV `task,episode,seed,mean_reward,std_reward`: one row per episode and a
/// `summary` row per task carrying mean and std.
std::string eval_report_csv(const std::vector<EvalReport>& reports);
std::vector<EvalReport> parse_eval_report_csv(std::string_view text);

}  // namespace plaid
