// Acceptance checks: one PASS/FAIL line per criterion. `--quick` skips the
// desk-scale replication.

#include <sys/wait.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "oracle.hpp"
#include "plaid/config.hpp"
#include "plaid/csv.hpp"
#include "plaid/curriculum.hpp"
#include "plaid/distill.hpp"
#include "plaid/inject.hpp"
#include "plaid/terrain.hpp"
#include "stub_envs.hpp"
#include "tiny.hpp"

using namespace plaid;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

/// Runs a check; an exception is a failure with its message as the detail.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(name, pass, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("threw: ") + e.what());
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  }
  return true;
}

std::pair<bool, std::string> injection_preservation() {
  const auto t0 = Clock::now();
  NetworkSpec spec;
  spec.input_width = kStateDim;
  spec.hidden_widths = {512, 256};
  spec.output_width = kActionDim;
  auto old_net = init_network(spec, 1);
  Rng rng = make_rng(2);
  for (auto& t : old_net.params()) {
    if (t.name.ends_with(".bias")) t.values = oracle::random_vector(rng, t.size(), 0.2);
  }
  const auto new_net = attach_terrain_branch(old_net);
  std::size_t equal = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = oracle::random_vector(rng, kStateDim, 2.0);
    const auto z = oracle::random_vector(rng, 50, 3.0);
    equal += bitwise_equal(forward(new_net, x, z), forward(old_net, x));
  }
  const double s = seconds_since(t0);
  return {equal == 1000 && s < 5.0, fmt("%.0f/1000 pairs bitwise equal, %.2f s (limit 5 s)", double(equal), s)};
}

std::pair<bool, std::string> gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(31);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = oracle::random_spec(rng);
    const auto net = init_network(spec, std::uint64_t(1000 + trial));
    const auto x = oracle::random_vector(rng, spec.input_width);
    std::vector<float> window;
    if (spec.terrain_branch) window = oracle::random_vector(rng, spec.terrain_branch->window);
    const auto c = oracle::random_vector(rng, spec.output_width);
    const auto r = oracle::check_gradients(net, x, window, c);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-4 && s < 30.0,
          fmt("100 nets, %.0f parameters, max rel error %.2e (limit 1e-4), %.2f s (limit 30 s)", double(checked), worst, s)};
}

std::pair<bool, std::string> ptd_td() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(41);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    const double r = uniform(rng, -2, 2), vn = uniform(rng, -10, 10), vc = uniform(rng, -10, 10);
    const double gamma = uniform(rng, 0, 0.999);
    const bool done = uniform(rng, 0, 1) < 0.1;
    const double expected = r + (done ? 0.0 : gamma * vn) - vc;
    const double d = td_error(r, vn, vc, gamma, done);
    if (d != expected) ++mismatches;
    if (ptd_advantage(d) != (expected > 0.0 ? 1 : 0)) ++mismatches;
  }
  // delta exactly zero is not an improvement.
  if (ptd_advantage(0.0) != 0 || ptd_advantage(-0.0) != 0 || td_error(0.5, 1.0, 1.0, 0.5, false) != 0.0) ++mismatches;
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 1.0, fmt("1e5 inputs, %.0f mismatches (exact), %.3f s (limit 1 s)", double(mismatches), s)};
}

std::pair<bool, std::string> tabular_critic() {
  const double gamma = 0.9;
  const double va = 1.0 / (1.0 - gamma * gamma), vb = gamma * va;
  NetworkSpec s;
  s.input_width = 2;
  s.hidden_widths = {8};
  s.output_width = 1;
  auto vf = ValueFunction::create(s, 2, gamma);
  const Observation a{{1, 0}, {}}, b{{0, 1}, {}};
  const Transition ab{a, {}, 1.0f, b, false, false}, ba{b, {}, 0.0f, a, false, false};
  const std::vector<const Transition*> batch{&ab, &ba};
  for (int i = 0; i < 5000; ++i) critic_update(vf, batch, gamma, 0.05f, 0.9f);
  const double err = std::max(std::abs(vf.value(a) - va), std::abs(vf.value(b) - vb));
  return {err <= 1e-2, fmt("|V - V*| = %.2e after 5000 updates (limit 1e-2)", err)};
}

std::pair<bool, std::string> distillation_oracle() {
  NetworkSpec vs;
  vs.input_width = kStateDim;
  vs.hidden_widths = {8};
  vs.output_width = 1;
  const float sl = 1.0f, ol = 0.3f, sr = -0.8f, or_ = 0.3f;
  ExpertAssignment assignment;
  assignment.add_expert({"L", GaussianPolicy(testing::context_linear_net(kStateDim, kActionDim, sl, ol), std::vector<float>(kActionDim, 0.1f)),
                         ValueFunction::create(vs, 1, 0.9)},
                        {"left"});
  assignment.add_expert({"R", GaussianPolicy(testing::context_linear_net(kStateDim, kActionDim, sr, or_), std::vector<float>(kActionDim, 0.1f)),
                         ValueFunction::create(vs, 2, 0.9)},
                        {"right"});
  auto envs = [&] {
    std::vector<std::unique_ptr<Environment>> e;
    e.push_back(std::make_unique<testing::BanditEnv>(testing::linear_target(sl, ol), -1.0f, 0.0f));
    e.push_back(std::make_unique<testing::BanditEnv>(testing::linear_target(sr, or_), 0.0f, 1.0f));
    return e;
  };
  NetworkSpec ps = vs;
  ps.hidden_widths = {32, 32};
  ps.output_width = kActionDim;
  NetworkSpec sv = vs;
  sv.hidden_widths = {32, 32};
  const auto student = GaussianPolicy::create(ps, 3, 0.1);

  // Provenance: every record is labelled by the expert assigned to its task.
  DistillCollector collector({"left", "right"}, envs(), 5);
  Rng rng = make_rng(6);
  std::size_t records = 0, bad = 0;
  for (double beta : {1.0, 0.5, 0.0}) {
    for (const auto& r : collector.collect(assignment, student, beta, rng, 2000)) {
      const auto& e = assignment.expert_for(r.task == 0 ? "left" : "right");
      bad += r.action_label != e.policy.mean(r.obs) || r.value_label != e.value_fn.value(r.obs);
      ++records;
    }
  }

  DistillConfig cfg;
  cfg.updates = 10000;
  const auto result = distill_with_envs(assignment, {"left", "right"}, envs(), student, ValueFunction::create(sv, 4, 0.9),
                                        cfg, 8);
  auto half_mse = [&](float lo, float hi, float slope, float offset) {
    double err = 0.0;
    int n = 0;
    for (int k = 0; k <= 100; ++k) {
      Observation o{std::vector<float>(kStateDim, 0.0f), {}};
      o.state[0] = lo + (hi - lo) * float(k) / 100.0f;
      o.state[1] = 1.0f;
      for (float m : result.policy.mean(o)) {
        err += std::pow(double(m) - (slope * o.state[0] + offset), 2);
        ++n;
      }
    }
    return err / n;
  };
  const double left = half_mse(-1.0f, 0.0f, sl, ol), right = half_mse(0.0f, 1.0f, sr, or_);
  return {left <= 0.01 && right <= 0.01 && bad == 0,
          fmt("MSE left %.2e right %.2e (limit 1e-2) after 10000 updates; %.0f/%.0f labels mislabelled", left, right,
              double(bad), double(records))};
}

std::pair<bool, std::string> terrain_fuzz() {
  const auto t0 = Clock::now();
  const TerrainConfig cfg;
  std::size_t out = 0, draws = 0;
  auto check = [&](double v, double lo, double hi) {
    ++draws;
    if (!(v >= lo && v <= hi)) ++out;
  };
  const double max_grade = std::tan(20.0 * std::numbers::pi / 180.0);
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng a = make_rng(seed), b = make_rng(seed), c = make_rng(seed), d = make_rng(seed);
    const auto inc = gen_terrain(TerrainKind::incline, a, cfg);
    for (double v : inc.draws.incline_deg) check(v, 20.0, 25.0);
    const auto st = gen_terrain(TerrainKind::steps, b, cfg);
    for (double v : st.draws.step_widths_m) check(v, 1.0, 1.5);
    for (double v : st.draws.step_heights_m) check(v, 0.05, 0.15);
    const auto sl = gen_terrain(TerrainKind::slopes, c, cfg);
    for (double v : sl.draws.slope_deltas_deg) check(v, -20.0, 20.0);
    for (double g : sl.grade) check(std::abs(g), 0.0, max_grade + 1e-12);
    const auto gp = gen_terrain(TerrainKind::gaps, d, cfg);
    for (double v : gp.draws.gap_widths_m) check(v, 0.25, 0.30);
    for (double v : gp.draws.gap_flats_m) check(v, 2.0, 2.5);
  }
  const double s = seconds_since(t0);
  return {out == 0 && s < 10.0 && cfg.slope_segment_m == 0.1,
          fmt("1e4 seeds x 4 generators, %.0f of %.0f sampled values out of range, %.2f s (limit 10 s)", double(out),
              double(draws), s)};
}

std::pair<bool, std::string> lineage_shapes() {
  std::string bad;
  for (std::size_t omega : {1u, 2u, 3u, 5u}) {
    auto count = [&](Method m, bool terminal) {
      auto cfg = testing::tiny_experiment(m, omega);
      cfg.plan.terminal_distill = terminal;
      return run_curriculum(cfg, 1).lineage;
    };
    const auto p = count(Method::plaid, false);
    if (p.count(NodeKind::tl) != omega || p.count(NodeKind::distill) != omega - 1) bad += " plaid/" + std::to_string(omega);
    const auto q = count(Method::parallel, false);
    if (q.count(NodeKind::tl) != omega || q.count(NodeKind::distill) != 1) bad += " parallel/" + std::to_string(omega);
    const auto t0 = count(Method::tl_only, false), t1 = count(Method::tl_only, true);
    if (t0.count(NodeKind::tl) != omega || t0.count(NodeKind::distill) != 0) bad += " tl_only/" + std::to_string(omega);
    if (t1.count(NodeKind::tl) != omega || t1.count(NodeKind::distill) != 1) bad += " tl_only+distill/" + std::to_string(omega);
    const auto m = count(Method::multitasker, false);
    bool chain = m.count(NodeKind::multitask) == omega && m.count(NodeKind::tl) + m.count(NodeKind::distill) == 0;
    for (std::size_t i = 1; i < m.nodes.size(); ++i) chain = chain && m.nodes[i].parents == std::vector{m.nodes[i - 1].id};
    if (!chain) bad += " multitasker/" + std::to_string(omega);
  }
  return {bad.empty(), bad.empty() ? "omega in {1,2,3,5}: plaid w+(w-1), parallel w+1, tl_only w+{0,1}, multitasker one chain"
                                   : "wrong shape:" + bad};
}

std::pair<bool, std::string> metric_arithmetic() {
  const std::vector<double> final_row{0.89072313686, 0.7997847458, 0.66610235084, 0.60244157756, 0.5289199521};
  const double final_avg = row_average(final_row);
  const std::vector<std::optional<double>> forget_row{0.05369152168, 0.155463332, 0.001460682862, 0.04312415806,
                                                      -0.08282105007};
  const double forget_avg = *forgetting_average(forget_row);
  const bool pass = std::abs(final_avg - 0.6975943526) <= 1e-6 && std::abs(forget_avg - 0.0634) <= 5e-5;
  return {pass, fmt("final-eval average %.10f (target 0.6975943526, tol 1e-6); forgetting average %.5f (target 0.0634)",
                    final_avg, forget_avg)};
}

std::pair<bool, std::string> desk_replication() {
  const auto t0 = Clock::now();
  auto loaded = load_config(PLAID_DESK_CONFIG);
  const std::uint64_t seed = loaded.seed.value_or(0);
  auto cfg = loaded.experiment;
  cfg.plan.method = Method::plaid;
  const auto plaid = run_curriculum(cfg, seed).lineage;
  cfg.plan.method = Method::tl_only;
  cfg.plan.terminal_distill = false;
  const auto tl = run_curriculum(cfg, seed).lineage;
  const double s = seconds_since(t0);

  // (a) the consolidated policy keeps 90% of every expert's reward.
  std::string ratios;
  bool keeps = true;
  const auto& final_node = plaid.node(plaid.final_node);
  for (const auto& task : plaid.tasks) {
    const double expert = plaid.node(plaid.original_node.at(task)).eval_for(task)->mean;
    const double consolidated = final_node.eval_for(task)->mean;
    keeps = keeps && consolidated >= 0.9 * expert;
    ratios += " " + task + fmt(" %.3f/%.3f", consolidated, expert);
  }
  // (b) chained transfer alone forgets more.
  const auto table = forgetting_table({plaid, tl});
  const double fp = *table.rows[0].average, ft = *table.rows[1].average;
  const bool orders = ft < fp;
  return {keeps && orders && s <= 900.0,
          "plaid/expert:" + ratios + fmt("; forgetting plaid %.4f vs tl_only %.4f; %.0f s (limit 900 s)", fp, ft, s)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() == ".csv") out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  }
  return out;
}

std::pair<bool, std::string> cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "plaid_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  write_text_file(root / "tiny.yaml", R"(seed: 5
plan: {tasks: [flat, incline, steps], tl_iters: 200, distill_updates: 100, episode_limit_steps: 40}
network: {hidden_widths: [16]}
train: {max_iters: 200, batch: 8, buffer_capacity: 64, eval_interval_iters: 100, eval_runs: 2}
distill: {batch: 8, buffer_capacity: 256, anneal_updates: 50, curve_interval_updates: 25}
evaluation: {runs: 3}
)");
  const std::string cli = PLAID_CLI_PATH, cfg = (root / "tiny.yaml").string();
  const std::vector<std::string> commands{
      "train --config " + cfg + " --workers 1 --out ",
      "curriculum --method plaid --config " + cfg + " --workers 1 --out ",
      "curriculum --method tl_only --repeats 2 --config " + cfg + " --workers 1 --out ",
  };
  std::size_t compared = 0;
  std::string differing;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::map<std::string, std::string> outputs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = root / (std::to_string(i) + "_" + std::to_string(k));
      const std::string cmd = "PLAID_LOG=off '" + cli + "' " + commands[i] + "'" + out.string() + "' > /dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: " + commands[i]};
      outputs[k] = csv_files(out);
    }
    compared += outputs[0].size();
    if (outputs[0] != outputs[1] || outputs[0].empty()) differing += " [" + commands[i] + "]";
  }
  fs::remove_all(root);
  return {differing.empty(), differing.empty() ? fmt("%.0f CSV files byte-identical across repeated invocations", double(compared))
                                               : "outputs differ:" + differing};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";

  criterion("injection-preservation", injection_preservation);
  criterion("gradient-oracle", gradient_oracle);
  criterion("ptd-td-correctness", ptd_td);
  criterion("tabular-critic", tabular_critic);
  criterion("distillation-oracle", distillation_oracle);
  criterion("terrain-fuzzing", terrain_fuzz);
  criterion("lineage-shapes", lineage_shapes);
  criterion("metric-arithmetic", metric_arithmetic);
  if (quick) {
    std::printf("SKIP  %-28s --quick\n", "desk-replication");
  } else {
    criterion("desk-replication", desk_replication);
  }
  criterion("cli-determinism", cli_determinism);
  return failures == 0 ? 0 : 1;
}
