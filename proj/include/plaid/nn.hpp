#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plaid {

/// 1-D convolution over the terrain window followed by a dense layer.
/// The dense output is fed into every layer that consumes a hidden layer.
struct TerrainBranchSpec {
  std::size_t window = 50;
  std::size_t filters = 8;
  std::size_t filter_width = 3;
  std::size_t dense_units = 32;

  /// Valid convolution: no padding.
  std::size_t positions() const { return window - filter_width + 1; }
  std::size_t conv_outputs() const { return positions() * filters; }

  friend bool operator==(const TerrainBranchSpec&, const TerrainBranchSpec&) = default;
};

struct NetworkSpec {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden_widths{512, 256};
  std::size_t output_width = 0;
  std::optional<TerrainBranchSpec> terrain_branch;

  /// Throws ConfigError.
  void validate() const;

  std::size_t dense_layers() const { return hidden_widths.size() + 1; }
  std::size_t layer_inputs(std::size_t layer) const;
  std::size_t layer_outputs(std::size_t layer) const;
  /// Dense layers after the first consume a hidden layer, hence the branch.
  bool consumes_branch(std::size_t layer) const {
    return terrain_branch.has_value() && layer >= 1;
  }

  std::string to_string() const;
  static NetworkSpec parse(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
  std::string shape_string() const;
};

/// Flat list of named tensors in topological order.
using ParamSet = std::vector<Tensor>;

/// Positions of each tensor inside a ParamSet built for a spec.
struct ParamLayout {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t conv_weight = npos;
  std::size_t conv_bias = npos;
  std::size_t branch_weight = npos;
  std::size_t branch_bias = npos;
  std::vector<std::size_t> dense_weight;
  std::vector<std::size_t> dense_bias;
  std::vector<std::size_t> concat_weight;  // npos where the layer has no branch input

  static ParamLayout of(const NetworkSpec& spec);
};

/// Zero-filled tensors with the names and shapes the spec dictates.
ParamSet make_param_shapes(const NetworkSpec& spec);

/// Activations recorded by a forward pass; consumed by backward().
struct Tape {
  std::vector<float> input;
  std::vector<float> window;
  std::vector<float> conv;    // post-ReLU, position-major
  std::vector<float> branch;  // post-ReLU
  std::vector<std::vector<float>> hidden;  // post-ReLU
  std::vector<float> output;

  bool empty() const { return output.empty(); }
};

class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, ParamSet params, std::uint64_t seed = 0,
          std::uint64_t update_count = 0);

  const NetworkSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const ParamSet& momentum() const { return momentum_; }
  ParamSet& momentum() { return momentum_; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t update_count() const { return update_count_; }
  void set_update_count(std::uint64_t n) { update_count_ = n; }

  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);
  std::size_t parameter_count() const;

  bool has_terrain_branch() const { return spec_.terrain_branch.has_value(); }

  /// Fresh zero-valued gradient buffers shaped like the parameters.
  ParamSet zero_gradients() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  NetworkSpec spec_;
  ParamLayout layout_;
  ParamSet params_;
  ParamSet momentum_;
  std::uint64_t seed_ = 0;
  std::uint64_t update_count_ = 0;
};

/// Glorot-uniform weights, zero biases. Deterministic in (spec, seed).
Network init_network(const NetworkSpec& spec, std::uint64_t seed);

/// `terrain_window` must be non-empty iff the spec has a terrain branch.
std::vector<float> forward(const Network& net, std::span<const float> input,
                           std::span<const float> terrain_window = {});

/// Same as forward() but records the activations needed by backward().
Tape forward_tape(const Network& net, std::span<const float> input,
                  std::span<const float> terrain_window = {});

/// Accumulates dL/dparams into `grads` (shaped by zero_gradients()).
void backward(const Network& net, const Tape& tape,
              std::span<const float> output_gradient, ParamSet& grads);

/// Returns fresh gradients for a single sample.
ParamSet backward(const Network& net, const Tape& tape,
                  std::span<const float> output_gradient);

/// buffer <- momentum * buffer + grad; param <- param - lr * buffer.
void sgd_momentum_step(Network& net, const ParamSet& grads, float lr, float momentum);

void scale_gradients(ParamSet& grads, float factor);

}  // namespace plaid
