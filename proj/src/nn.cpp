#include "plaid/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "plaid/error.hpp"
#include "plaid/rng.hpp"

namespace plaid {

namespace {

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<std::size_t> split_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw FormatError("empty width in '" + text + "'");
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      throw FormatError("bad width '" + item + "'");
    }
    if (pos != item.size()) throw FormatError("bad width '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// y[i] += sum_j x[j] * w[j, i], accumulated in increasing j for every i.
void accumulate_dense(const float* w, std::span<const float> x, float* y, std::size_t out) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    const float xj = x[j];
    const float* row = w + j * out;
    for (std::size_t i = 0; i < out; ++i) y[i] += xj * row[i];
  }
}

// dw[j, i] += x[j] * g[i]
void accumulate_outer(float* dw, std::span<const float> x, std::span<const float> g) {
  const std::size_t out = g.size();
  for (std::size_t j = 0; j < x.size(); ++j) {
    const float xj = x[j];
    float* row = dw + j * out;
    for (std::size_t i = 0; i < out; ++i) row[i] += xj * g[i];
  }
}

// gx[j] = sum_i w[j, i] * g[i]
void backprop_dense(const float* w, std::span<const float> g, std::span<float> gx) {
  const std::size_t out = g.size();
  for (std::size_t j = 0; j < gx.size(); ++j) {
    const float* row = w + j * out;
    float s = 0.0f;
    for (std::size_t i = 0; i < out; ++i) s += row[i] * g[i];
    gx[j] = s;
  }
}

inline float relu(float x) { return x > 0.0f ? x : 0.0f; }

void check_input(const NetworkSpec& spec, std::span<const float> input,
                 std::span<const float> window) {
  if (input.size() != spec.input_width) {
    throw ShapeError("input width " + std::to_string(input.size()) + " != spec width " +
                     std::to_string(spec.input_width));
  }
  if (spec.terrain_branch) {
    if (window.size() != spec.terrain_branch->window) {
      throw ShapeError("terrain window width " + std::to_string(window.size()) +
                       " != branch window " + std::to_string(spec.terrain_branch->window));
    }
  } else if (!window.empty()) {
    throw ShapeError("terrain window given to a network without a terrain branch");
  }
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_width < 1) throw ConfigError("network input_width must be >= 1");
  if (output_width < 1) throw ConfigError("network output_width must be >= 1");
  if (hidden_widths.empty()) throw ConfigError("network hidden_widths must be non-empty");
  for (auto w : hidden_widths) {
    if (w < 1) throw ConfigError("network hidden widths must be >= 1");
  }
  if (terrain_branch) {
    const auto& b = *terrain_branch;
    if (b.window < 1 || b.filters < 1 || b.filter_width < 1 || b.dense_units < 1) {
      throw ConfigError("terrain branch sizes must be >= 1");
    }
    if (b.window < b.filter_width) {
      throw ConfigError("terrain branch window must be >= filter_width");
    }
  }
}

std::size_t NetworkSpec::layer_inputs(std::size_t layer) const {
  return layer == 0 ? input_width : hidden_widths[layer - 1];
}

std::size_t NetworkSpec::layer_outputs(std::size_t layer) const {
  return layer < hidden_widths.size() ? hidden_widths[layer] : output_width;
}

std::string NetworkSpec::to_string() const {
  std::string s = "input=" + std::to_string(input_width) + " hidden=" + join_widths(hidden_widths) +
                  " output=" + std::to_string(output_width) + " branch=";
  if (terrain_branch) {
    const auto& b = *terrain_branch;
    s += join_widths({b.window, b.filters, b.filter_width, b.dense_units});
  } else {
    s += "none";
  }
  return s;
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec spec;
  spec.hidden_widths.clear();
  std::stringstream ss(text);
  std::string token;
  bool seen[4] = {false, false, false, false};
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("bad spec token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "input") {
      auto w = split_widths(value);
      if (w.size() != 1) throw FormatError("bad input width");
      spec.input_width = w[0];
      seen[0] = true;
    } else if (key == "hidden") {
      spec.hidden_widths = split_widths(value);
      seen[1] = true;
    } else if (key == "output") {
      auto w = split_widths(value);
      if (w.size() != 1) throw FormatError("bad output width");
      spec.output_width = w[0];
      seen[2] = true;
    } else if (key == "branch") {
      if (value != "none") {
        auto w = split_widths(value);
        if (w.size() != 4) throw FormatError("terrain branch needs 4 sizes");
        spec.terrain_branch = TerrainBranchSpec{w[0], w[1], w[2], w[3]};
      }
      seen[3] = true;
    } else {
      throw FormatError("unknown spec key '" + key + "'");
    }
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3])) throw FormatError("incomplete network spec");
  return spec;
}

std::string Tensor::shape_string() const {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

ParamLayout ParamLayout::of(const NetworkSpec& spec) {
  ParamLayout layout;
  std::size_t next = 0;
  if (spec.terrain_branch) {
    layout.conv_weight = next++;
    layout.conv_bias = next++;
    layout.branch_weight = next++;
    layout.branch_bias = next++;
  }
  for (std::size_t l = 0; l < spec.dense_layers(); ++l) {
    layout.dense_weight.push_back(next++);
    layout.dense_bias.push_back(next++);
    layout.concat_weight.push_back(spec.consumes_branch(l) ? next++ : npos);
  }
  return layout;
}

ParamSet make_param_shapes(const NetworkSpec& spec) {
  ParamSet params;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    params.push_back(Tensor{std::move(name), std::move(shape), std::vector<float>(n, 0.0f)});
  };
  if (spec.terrain_branch) {
    const auto& b = *spec.terrain_branch;
    add("conv.weight", {b.filters, b.filter_width});
    add("conv.bias", {b.filters});
    add("branch.weight", {b.conv_outputs(), b.dense_units});
    add("branch.bias", {b.dense_units});
  }
  for (std::size_t l = 0; l < spec.dense_layers(); ++l) {
    const std::string prefix = "dense" + std::to_string(l);
    add(prefix + ".weight", {spec.layer_inputs(l), spec.layer_outputs(l)});
    add(prefix + ".bias", {spec.layer_outputs(l)});
    if (spec.consumes_branch(l)) {
      add(prefix + ".terrain", {spec.terrain_branch->dense_units, spec.layer_outputs(l)});
    }
  }
  return params;
}

Network::Network(NetworkSpec spec, ParamSet params, std::uint64_t seed, std::uint64_t update_count)
    : spec_(std::move(spec)), seed_(seed), update_count_(update_count) {
  spec_.validate();
  layout_ = ParamLayout::of(spec_);
  momentum_ = make_param_shapes(spec_);
  if (params.size() != momentum_.size()) {
    throw ShapeError("expected " + std::to_string(momentum_.size()) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != momentum_[i].name) {
      throw ShapeError("layer " + params[i].name + ": expected layer " + momentum_[i].name);
    }
    if (params[i].shape != momentum_[i].shape || params[i].values.size() != momentum_[i].size()) {
      throw ShapeError("layer " + params[i].name + ": expected shape " +
                       momentum_[i].shape_string() + ", found " + params[i].shape_string());
    }
  }
  params_ = std::move(params);
}

const Tensor& Network::param(const std::string& name) const {
  for (const auto& t : params_) {
    if (t.name == name) return t;
  }
  throw UsageError("no parameter named " + name);
}

Tensor& Network::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const Network&>(*this).param(name));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.size();
  return n;
}

ParamSet Network::zero_gradients() const { return make_param_shapes(spec_); }

bool operator==(const Network& a, const Network& b) {
  if (!(a.spec_ == b.spec_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i].values;
    const auto& y = b.params_[i].values;
    if (x.size() != y.size()) return false;
    // Bitwise, so that -0.0f != 0.0f and NaN payloads compare.
    if (!std::equal(x.begin(), x.end(), y.begin(), [](float p, float q) {
          return std::bit_cast<std::uint32_t>(p) == std::bit_cast<std::uint32_t>(q);
        })) {
      return false;
    }
  }
  return true;
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamSet params = make_param_shapes(spec);
  const auto layout = ParamLayout::of(spec);
  Rng rng = make_rng(seed);

  auto fill = [&](Tensor& t, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.values) v = static_cast<float>(dist(rng));
  };

  if (spec.terrain_branch) {
    const auto& b = *spec.terrain_branch;
    fill(params[layout.conv_weight], double(b.filter_width), double(b.filters * b.filter_width));
    fill(params[layout.branch_weight], double(b.conv_outputs()), double(b.dense_units));
  }
  for (std::size_t l = 0; l < spec.dense_layers(); ++l) {
    double fan_in = double(spec.layer_inputs(l));
    if (spec.consumes_branch(l)) fan_in += double(spec.terrain_branch->dense_units);
    const double fan_out = double(spec.layer_outputs(l));
    fill(params[layout.dense_weight[l]], fan_in, fan_out);
    if (layout.concat_weight[l] != ParamLayout::npos) {
      fill(params[layout.concat_weight[l]], fan_in, fan_out);
    }
  }
  return Network(spec, std::move(params), seed, 0);
}

Tape forward_tape(const Network& net, std::span<const float> input,
                  std::span<const float> terrain_window) {
  const auto& spec = net.spec();
  const auto& layout = net.layout();
  const auto& p = net.params();
  check_input(spec, input, terrain_window);

  Tape tape;
  tape.input.assign(input.begin(), input.end());

  if (spec.terrain_branch) {
    const auto& b = *spec.terrain_branch;
    tape.window.assign(terrain_window.begin(), terrain_window.end());
    const float* cw = p[layout.conv_weight].values.data();
    const float* cb = p[layout.conv_bias].values.data();
    tape.conv.resize(b.conv_outputs());
    for (std::size_t pos = 0; pos < b.positions(); ++pos) {
      for (std::size_t f = 0; f < b.filters; ++f) {
        float s = cb[f];
        for (std::size_t t = 0; t < b.filter_width; ++t) {
          s += cw[f * b.filter_width + t] * terrain_window[pos + t];
        }
        tape.conv[pos * b.filters + f] = relu(s);
      }
    }
    const auto& bb = p[layout.branch_bias].values;
    tape.branch.assign(bb.begin(), bb.end());
    accumulate_dense(p[layout.branch_weight].values.data(), tape.conv, tape.branch.data(),
                     b.dense_units);
    for (auto& v : tape.branch) v = relu(v);
  }

  const std::size_t layers = spec.dense_layers();
  tape.hidden.resize(layers - 1);
  std::span<const float> x = tape.input;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& bias = p[layout.dense_bias[l]].values;
    std::vector<float> y(bias.begin(), bias.end());
    accumulate_dense(p[layout.dense_weight[l]].values.data(), x, y.data(), y.size());
    if (layout.concat_weight[l] != ParamLayout::npos) {
      accumulate_dense(p[layout.concat_weight[l]].values.data(), tape.branch, y.data(), y.size());
    }
    if (l + 1 < layers) {
      for (auto& v : y) v = relu(v);
      tape.hidden[l] = std::move(y);
      x = tape.hidden[l];
    } else {
      tape.output = std::move(y);
    }
  }
  return tape;
}

std::vector<float> forward(const Network& net, std::span<const float> input,
                           std::span<const float> terrain_window) {
  return std::move(forward_tape(net, input, terrain_window).output);
}

void backward(const Network& net, const Tape& tape, std::span<const float> output_gradient,
              ParamSet& grads) {
  const auto& spec = net.spec();
  const auto& layout = net.layout();
  const auto& p = net.params();
  if (tape.empty()) throw UsageError("backward called without a recorded forward pass");
  if (output_gradient.size() != spec.output_width) {
    throw ShapeError("output gradient width " + std::to_string(output_gradient.size()) +
                     " != output width " + std::to_string(spec.output_width));
  }
  if (grads.size() != p.size()) throw ShapeError("gradient buffers do not match parameters");

  const std::size_t layers = spec.dense_layers();
  std::vector<float> g(output_gradient.begin(), output_gradient.end());
  std::vector<float> g_branch;
  if (spec.terrain_branch) g_branch.assign(spec.terrain_branch->dense_units, 0.0f);

  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      const auto& h = tape.hidden[l];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(h[i] > 0.0f)) g[i] = 0.0f;
      }
    }
    std::span<const float> x = l == 0 ? std::span<const float>(tape.input) : tape.hidden[l - 1];
    auto& db = grads[layout.dense_bias[l]].values;
    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
    accumulate_outer(grads[layout.dense_weight[l]].values.data(), x, g);

    if (layout.concat_weight[l] != ParamLayout::npos) {
      accumulate_outer(grads[layout.concat_weight[l]].values.data(), tape.branch, g);
      std::vector<float> gd(g_branch.size());
      backprop_dense(p[layout.concat_weight[l]].values.data(), g, gd);
      for (std::size_t k = 0; k < gd.size(); ++k) g_branch[k] += gd[k];
    }
    if (l > 0) {
      std::vector<float> gx(x.size());
      backprop_dense(p[layout.dense_weight[l]].values.data(), g, gx);
      g = std::move(gx);
    }
  }

  if (spec.terrain_branch) {
    const auto& b = *spec.terrain_branch;
    for (std::size_t k = 0; k < g_branch.size(); ++k) {
      if (!(tape.branch[k] > 0.0f)) g_branch[k] = 0.0f;
    }
    auto& dbb = grads[layout.branch_bias].values;
    for (std::size_t k = 0; k < g_branch.size(); ++k) dbb[k] += g_branch[k];
    accumulate_outer(grads[layout.branch_weight].values.data(), tape.conv, g_branch);

    std::vector<float> g_conv(b.conv_outputs());
    backprop_dense(p[layout.branch_weight].values.data(), g_branch, g_conv);
    auto& dcw = grads[layout.conv_weight].values;
    auto& dcb = grads[layout.conv_bias].values;
    for (std::size_t pos = 0; pos < b.positions(); ++pos) {
      for (std::size_t f = 0; f < b.filters; ++f) {
        const std::size_t idx = pos * b.filters + f;
        if (!(tape.conv[idx] > 0.0f)) continue;
        const float gv = g_conv[idx];
        dcb[f] += gv;
        for (std::size_t t = 0; t < b.filter_width; ++t) {
          dcw[f * b.filter_width + t] += gv * tape.window[pos + t];
        }
      }
    }
  }
}

ParamSet backward(const Network& net, const Tape& tape, std::span<const float> output_gradient) {
  ParamSet grads = net.zero_gradients();
  backward(net, tape, output_gradient, grads);
  return grads;
}

void sgd_momentum_step(Network& net, const ParamSet& grads, float lr, float momentum) {
  auto& params = net.params();
  auto& buffers = net.momentum();
  if (grads.size() != params.size()) throw ShapeError("gradient tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape != params[i].shape || grads[i].size() != params[i].size()) {
      throw ShapeError("gradient for " + params[i].name + " has shape " +
                       grads[i].shape_string() + ", expected " + params[i].shape_string());
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].values;
    auto& buf = buffers[i].values;
    const auto& g = grads[i].values;
    for (std::size_t k = 0; k < w.size(); ++k) {
      buf[k] = momentum * buf[k] + g[k];
      w[k] -= lr * buf[k];
    }
  }
  net.set_update_count(net.update_count() + 1);
}

void scale_gradients(ParamSet& grads, float factor) {
  for (auto& t : grads) {
    for (auto& v : t.values) v *= factor;
  }
}

}  // namespace plaid
