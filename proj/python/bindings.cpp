// Python bindings for the plaid core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "plaid/checkpoint.hpp"
#include "plaid/config.hpp"
#include "plaid/curriculum.hpp"
#include "plaid/error.hpp"
#include "plaid/inject.hpp"

namespace py = pybind11;
using namespace plaid;

namespace {

TerrainKind kind_of(const std::string& name) {
  const auto k = parse_terrain_kind(name);
  if (!k) throw ConfigError("unknown terrain '" + name + "'");
  return *k;
}

py::dict terrain_dict(const Terrain& t) {
  py::dict d;
  d["kind"] = std::string(to_string(t.kind));
  d["grid_m"] = t.grid_m;
  d["heights"] = t.heights;
  d["grade"] = t.grade;
  std::vector<std::pair<double, double>> edges, gaps;
  for (const auto& e : t.edges) edges.emplace_back(e.x, e.height);
  for (const auto& g : t.gaps) gaps.emplace_back(g.start, g.end);
  d["edges"] = edges;
  d["gaps"] = gaps;
  return d;
}

py::dict node_dict(const LineageNode& n) {
  py::dict d;
  d["id"] = n.id;
  d["kind"] = std::string(to_string(n.kind));
  d["parents"] = n.parents;
  d["coverage"] = n.coverage;
  d["injected"] = n.injected;
  py::dict evals;
  for (const auto& r : n.evals) evals[py::str(r.task)] = py::make_tuple(r.mean, r.std);
  d["evals"] = evals;
  return d;
}

py::dict lineage_dict(const PolicyLineage& l) {
  py::dict d;
  d["method"] = std::string(to_string(l.method));
  d["tasks"] = l.tasks;
  d["final_node"] = l.final_node;
  d["original_node"] = l.original_node;
  d["injections"] = l.injections;
  py::list nodes;
  for (const auto& n : l.nodes) nodes.append(node_dict(n));
  d["nodes"] = nodes;
  const auto f = forgetting_row(l);
  d["forgetting"] = f.values;
  d["forgetting_average"] = f.average;
  const auto e = final_eval_row(l);
  d["final_eval"] = e.values;
  d["final_eval_average"] = e.average;
  return d;
}

/// Observation as (state, window) lists.
py::tuple obs_tuple(const Observation& o) { return py::make_tuple(o.state, o.window); }

}  // namespace

PYBIND11_MODULE(_plaid, m) {
  m.doc() = "Progressive learn-then-distill continual RL on a reduced-biped terrain benchmark";

  // Subclasses first so pybind11 matches the most specific type.
  auto base = py::register_exception<Error>(m, "PlaidError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<VersionError>(m, "VersionError", base.ptr());
  py::register_exception<TruncationError>(m, "TruncationError", base.ptr());
  py::register_exception<SimulationFault>(m, "SimulationFault", base.ptr());
  py::register_exception<MissingEvalError>(m, "MissingEvalError", base.ptr());

  m.attr("STATE_DIM") = kStateDim;
  m.attr("ACTION_DIM") = kActionDim;

  py::class_<TerrainBranchSpec>(m, "TerrainBranchSpec")
      .def(py::init<>())
      .def_readwrite("window", &TerrainBranchSpec::window)
      .def_readwrite("filters", &TerrainBranchSpec::filters)
      .def_readwrite("filter_width", &TerrainBranchSpec::filter_width)
      .def_readwrite("dense_units", &TerrainBranchSpec::dense_units);

  py::class_<NetworkSpec>(m, "NetworkSpec")
      .def(py::init([](std::size_t input_width, std::vector<std::size_t> hidden, std::size_t output_width,
                       std::optional<TerrainBranchSpec> branch) {
             NetworkSpec s;
             s.input_width = input_width;
             s.hidden_widths = std::move(hidden);
             s.output_width = output_width;
             s.terrain_branch = branch;
             s.validate();
             return s;
           }),
           py::arg("input_width"), py::arg("hidden_widths"), py::arg("output_width"), py::arg("terrain_branch") = py::none())
      .def_readonly("input_width", &NetworkSpec::input_width)
      .def_readonly("hidden_widths", &NetworkSpec::hidden_widths)
      .def_readonly("output_width", &NetworkSpec::output_width)
      .def_readonly("terrain_branch", &NetworkSpec::terrain_branch);

  py::class_<Network>(m, "Network")
      .def_property_readonly("spec", &Network::spec)
      .def_property_readonly("seed", &Network::seed)
      .def_property_readonly("has_terrain_branch", &Network::has_terrain_branch)
      .def("parameter_count", &Network::parameter_count)
      .def("param_names",
           [](const Network& n) {
             std::vector<std::string> names;
             for (const auto& t : n.params()) names.push_back(t.name);
             return names;
           })
      .def("param", [](const Network& n, const std::string& name) { return n.param(name).values; })
      .def(
          "forward",
          [](const Network& n, std::vector<float> x, std::vector<float> window) { return forward(n, x, window); },
          py::arg("state"), py::arg("window") = std::vector<float>{})
      .def("save", [](const Network& n) { return py::bytes(save_checkpoint(n)); })
      .def_static("load", [](const py::bytes& b) { return load_checkpoint(std::string(b)); })
      .def("__eq__", [](const Network& a, const Network& b) { return a == b; });

  m.def("init_network", &init_network, py::arg("spec"), py::arg("seed"));
  m.def("read_checkpoint", &read_checkpoint, py::arg("path"));
  m.def("write_checkpoint", &write_checkpoint, py::arg("net"), py::arg("path"));
  m.def("attach_terrain_branch", &attach_terrain_branch, py::arg("net"), py::arg("branch") = TerrainBranchSpec{},
        py::arg("seed") = py::none());
  m.def("inject_inputs", &inject_inputs, py::arg("net"), py::arg("new_spec"), py::arg("seed") = py::none());

  m.def(
      "generate_terrain",
      [](const std::string& kind, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return terrain_dict(gen_terrain(kind_of(kind), rng, TerrainConfig{}));
      },
      py::arg("kind"), py::arg("seed"));

  py::class_<BipedEnv>(m, "BipedEnv")
      .def(py::init([](const std::string& task, std::size_t episode_limit) {
             return BipedEnv(TaskSpec::for_kind(kind_of(task), episode_limit), EnvConfig{});
           }),
           py::arg("task"), py::arg("episode_limit") = 3000)
      .def("reset", [](BipedEnv& e, std::uint64_t seed) { return obs_tuple(e.reset(seed)); }, py::arg("seed"))
      .def("step",
           [](BipedEnv& e, std::vector<float> action) {
             const auto out = e.step(action);
             return py::make_tuple(obs_tuple(out.observation), out.reward, out.terminal, out.truncated);
           })
      .def_property_readonly("x", [](const BipedEnv& e) { return e.state().x; })
      .def_property_readonly("terrain", [](const BipedEnv& e) { return terrain_dict(e.terrain()); });

  m.def("td_error", &td_error, py::arg("r"), py::arg("v_next"), py::arg("v_curr"), py::arg("gamma"), py::arg("done"));
  m.def("ptd_advantage", &ptd_advantage, py::arg("delta"));
  m.def("mixing_probability", &mixing_probability, py::arg("update"), py::arg("anneal_updates") = 10000);
  m.def("relative_change", &relative_change, py::arg("original"), py::arg("final"));
  m.def("forgetting_average", &forgetting_average, py::arg("row"));
  m.def("row_average", &row_average, py::arg("row"));

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& path, const std::string& task, std::size_t runs, std::uint64_t seed,
         std::size_t episode_limit) {
        GaussianPolicy policy(read_checkpoint(path), std::vector<float>(kActionDim, 0.1f));
        const TaskSpec spec = TaskSpec::for_kind(kind_of(task), episode_limit);
        check_task_compatible(policy.net(), spec);
        const auto r = evaluate_policy(policy, spec, EnvConfig{}, runs, seed);
        return py::make_tuple(r.mean, r.std, r.episode_rewards);
      },
      py::arg("path"), py::arg("task"), py::arg("runs") = 16, py::arg("seed") = 7, py::arg("episode_limit") = 3000);

  m.def(
      "run_curriculum",
      [](const std::string& config_text, std::optional<std::string> method, std::optional<std::uint64_t> seed,
         std::optional<std::filesystem::path> lineage_dir) {
        auto loaded = parse_config(config_text, "<python>");
        auto& cfg = loaded.experiment;
        if (method) {
          const auto m = parse_method(*method);
          if (!m) throw ConfigError("unknown method '" + *method + "' (valid: " + method_names() + ")");
          cfg.plan.method = *m;
        }
        RunHooks hooks;
        hooks.lineage_dir = lineage_dir;
        CurriculumResult r;
        {
          py::gil_scoped_release release;
          r = run_curriculum(cfg, seed.value_or(loaded.seed.value_or(0)), hooks);
        }
        py::dict out = lineage_dict(r.lineage);
        out["policy"] = r.final_policy.net();
        return out;
      },
      py::arg("config"), py::arg("method") = py::none(), py::arg("seed") = py::none(),
      py::arg("lineage_dir") = py::none(),
      "Runs a curriculum from a YAML config string; returns the lineage with its tables.");

  m.def("read_lineage", [](const std::filesystem::path& dir) { return lineage_dict(read_lineage(dir)); },
        py::arg("dir"));
}
