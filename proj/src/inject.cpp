#include "plaid/inject.hpp"

#include <algorithm>

#include "plaid/error.hpp"
#include "plaid/rng.hpp"

namespace plaid {

bool extends(const NetworkSpec& base, const NetworkSpec& next) {
  if (next.hidden_widths != base.hidden_widths || next.output_width != base.output_width) return false;
  if (next.input_width < base.input_width) return false;
  if (base.terrain_branch && next.terrain_branch != base.terrain_branch) return false;
  const bool adds_inputs = next.input_width > base.input_width;
  const bool adds_branch = next.terrain_branch.has_value() && !base.terrain_branch.has_value();
  return adds_inputs || adds_branch;
}

Network inject_inputs(const Network& net, const NetworkSpec& new_spec, std::optional<std::uint64_t> seed) {
  new_spec.validate();
  const NetworkSpec& old_spec = net.spec();
  if (!extends(old_spec, new_spec)) {
    throw ConfigError("cannot inject: [" + new_spec.to_string() + "] does not extend [" +
                      old_spec.to_string() + "]");
  }
  // Fresh parameters supply the random branch internals.
  const Network fresh = init_network(new_spec, seed.value_or(derive_seed(net.seed(), "inject")));
  ParamSet params = fresh.params();
  const auto& old_layout = net.layout();
  const auto& new_layout = fresh.layout();
  const auto& old_p = net.params();

  if (old_spec.terrain_branch) {
    params[new_layout.conv_weight] = old_p[old_layout.conv_weight];
    params[new_layout.conv_bias] = old_p[old_layout.conv_bias];
    params[new_layout.branch_weight] = old_p[old_layout.branch_weight];
    params[new_layout.branch_bias] = old_p[old_layout.branch_bias];
  }
  for (std::size_t l = 0; l < new_spec.dense_layers(); ++l) {
    params[new_layout.dense_bias[l]] = old_p[old_layout.dense_bias[l]];
    auto& w = params[new_layout.dense_weight[l]].values;
    const auto& old_w = old_p[old_layout.dense_weight[l]].values;
    // Rows are inputs; the old rows come first, the appended ones are zero.
    std::fill(w.begin(), w.end(), 0.0f);
    std::copy(old_w.begin(), old_w.end(), w.begin());

    if (new_layout.concat_weight[l] == ParamLayout::npos) continue;
    auto& c = params[new_layout.concat_weight[l]].values;
    if (old_layout.concat_weight[l] != ParamLayout::npos) {
      c = old_p[old_layout.concat_weight[l]].values;
    } else {
      std::fill(c.begin(), c.end(), 0.0f);
    }
  }
  return Network(new_spec, std::move(params), net.seed(), net.update_count());
}

Network attach_terrain_branch(const Network& net, const TerrainBranchSpec& branch,
                              std::optional<std::uint64_t> seed) {
  if (net.has_terrain_branch()) throw ConfigError("network already has a terrain branch");
  NetworkSpec spec = net.spec();
  spec.terrain_branch = branch;
  return inject_inputs(net, spec, seed);
}

}  // namespace plaid
