#include "plaid/evaluate.hpp"

#include <cmath>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"
#include "plaid/rng.hpp"

namespace plaid {

void EvalReport::summarize() {
  mean = 0.0;
  std = 0.0;
  if (episode_rewards.empty()) return;
  for (double r : episode_rewards) mean += r;
  mean /= double(episode_rewards.size());
  for (double r : episode_rewards) std += (r - mean) * (r - mean);
  std = std::sqrt(std / double(episode_rewards.size()));
}

std::vector<std::uint64_t> evaluation_seeds(std::string_view task, std::uint64_t base_seed,
                                            std::size_t n_runs) {
  std::vector<std::uint64_t> seeds(n_runs);
  const auto task_seed = derive_seed(base_seed, task);
  for (std::size_t k = 0; k < n_runs; ++k) seeds[k] = derive_seed(task_seed, "episode", k);
  return seeds;
}

double run_episode(const ActionFn& act, Environment& env, std::uint64_t episode_seed,
                   std::vector<EpisodeLogRow>* log) {
  Observation obs = env.reset(episode_seed);
  const std::size_t limit = env.episode_limit();
  double total = 0.0;
  for (std::size_t t = 0; t < limit; ++t) {
    const auto action = act(obs);
    StepOutcome out = env.step(action);
    total += out.reward;
    if (log) {
      const auto* biped = dynamic_cast<const BipedEnv*>(&env);
      log->push_back({t + 1, biped ? biped->state().x : 0.0, biped ? biped->state().phase : 0.0,
                      out.reward, out.done()});
    }
    if (out.done()) break;
    obs = std::move(out.observation);
  }
  return total / double(limit);
}

EvalReport evaluate(const ActionFn& act, Environment& env, std::string_view task_name,
                    std::size_t n_runs, std::uint64_t base_seed) {
  if (n_runs < 1) throw UsageError("evaluate needs n_runs >= 1");
  EvalReport report;
  report.task = std::string(task_name);
  report.base_seed = base_seed;
  report.episode_seeds = evaluation_seeds(task_name, base_seed, n_runs);
  for (auto seed : report.episode_seeds) report.episode_rewards.push_back(run_episode(act, env, seed));
  report.summarize();
  return report;
}

std::string eval_report_csv(const std::vector<EvalReport>& reports) {
  CsvWriter csv{"task", "episode", "seed", "mean_reward", "std_reward"};
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.episode_rewards.size(); ++k) {
      csv.cell(r.task).cell(k).cell(static_cast<unsigned long long>(r.episode_seeds[k]));
      csv.cell(r.episode_rewards[k]).empty_cell().end_row();
    }
    csv.cell(r.task).cell("summary").cell(static_cast<unsigned long long>(r.base_seed));
    csv.cell(r.mean).cell(r.std).end_row();
  }
  return csv.str();
}

std::vector<EvalReport> parse_eval_report_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"task", "episode", "seed", "mean_reward", "std_reward"}) {
    throw FormatError("eval report CSV has an unexpected header");
  }
  std::vector<EvalReport> out;
  EvalReport current;
  bool open = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 5) throw FormatError("eval report CSV row " + std::to_string(i + 1) + " has wrong width");
    try {
      if (!open) {
        current = EvalReport{};
        current.task = row[0];
        open = true;
      } else if (row[0] != current.task) {
        throw FormatError("eval report CSV: task " + current.task + " has no summary row");
      }
      if (row[1] == "summary") {
        current.base_seed = std::stoull(row[2]);
        current.mean = std::stod(row[3]);
        current.std = std::stod(row[4]);
        out.push_back(std::move(current));
        open = false;
      } else {
        current.episode_seeds.push_back(std::stoull(row[2]));
        current.episode_rewards.push_back(std::stod(row[3]));
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("eval report CSV row " + std::to_string(i + 1) + " is not numeric");
    } catch (const std::out_of_range&) {
      throw FormatError("eval report CSV row " + std::to_string(i + 1) + " is out of range");
    }
  }
  if (open) throw FormatError("eval report CSV: task " + current.task + " has no summary row");
  return out;
}

}  // namespace plaid
