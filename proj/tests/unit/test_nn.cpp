#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "plaid/error.hpp"
#include "plaid/nn.hpp"

using namespace plaid;

namespace {

NetworkSpec small_spec(bool branch) {
  NetworkSpec s;
  s.input_width = 5;
  s.hidden_widths = {7, 4};
  s.output_width = 3;
  if (branch) s.terrain_branch = TerrainBranchSpec{10, 2, 3, 4};
  return s;
}

}  // namespace

TEST_CASE("spec text round trip") {
  for (bool branch : {false, true}) {
    const auto spec = small_spec(branch);
    CHECK(NetworkSpec::parse(spec.to_string()) == spec);
  }
  CHECK_THROWS_AS(NetworkSpec::parse("input=3 hidden=2"), FormatError);
  CHECK_THROWS_AS(NetworkSpec::parse("input=3 hidden=2 output=x branch=none"), FormatError);
}

TEST_CASE("invalid specs are configuration errors") {
  NetworkSpec s = small_spec(false);
  s.hidden_widths.clear();
  CHECK_THROWS_AS(init_network(s, 1), ConfigError);
  s = small_spec(true);
  s.terrain_branch->filter_width = 20;
  CHECK_THROWS_AS(init_network(s, 1), ConfigError);
  s = small_spec(false);
  s.output_width = 0;
  CHECK_THROWS_AS(init_network(s, 1), ConfigError);
}

TEST_CASE("init is deterministic with zero biases and glorot bounds") {
  const auto spec = small_spec(true);
  const auto a = init_network(spec, 42);
  const auto b = init_network(spec, 42);
  CHECK(a == b);
  CHECK_FALSE(a == init_network(spec, 43));
  for (const auto& t : a.params()) {
    if (t.name.ends_with(".bias")) {
      for (float v : t.values) CHECK(v == 0.0f);
    }
  }
  for (const auto& t : a.momentum()) {
    for (float v : t.values) CHECK(v == 0.0f);
  }
  // dense0: fan_in 5, fan_out 7
  const double limit = std::sqrt(6.0 / 12.0);
  for (float v : a.param("dense0.weight").values) CHECK(std::abs(v) <= limit);
}

TEST_CASE("init weight mean matches the uniform distribution") {
  NetworkSpec s;
  s.input_width = 1000;
  s.hidden_widths = {1000};
  s.output_width = 1;
  const auto net = init_network(s, 9);
  const auto& w = net.param("dense0.weight").values;
  REQUIRE(w.size() == 1000000);
  double sum = 0.0;
  for (float v : w) sum += v;
  const double mean = sum / double(w.size());
  const double limit = std::sqrt(6.0 / 2000.0);
  const double sigma = limit / std::sqrt(3.0);  // std of U(-l, l)
  CHECK(std::abs(mean) < 3.0 * sigma / 1000.0);
}

TEST_CASE("identity dense layer passes positive inputs through") {
  NetworkSpec s;
  s.input_width = 2;
  s.hidden_widths = {2};
  s.output_width = 2;
  auto net = init_network(s, 1);
  net.param("dense0.weight").values = {1, 0, 0, 1};
  net.param("dense1.weight").values = {1, 0, 0, 1};
  const std::vector<float> x{1, 2};
  const auto y = forward(net, x);
  CHECK(y == std::vector<float>{1, 2});
}

TEST_CASE("zero conv filters give a zero branch") {
  auto net = init_network(small_spec(true), 3);
  for (auto& v : net.param("conv.weight").values) v = 0.0f;
  Rng rng = make_rng(5);
  const auto x = oracle::random_vector(rng, 5);
  const auto window = oracle::random_vector(rng, 10);
  const auto tape = forward_tape(net, x, window);
  for (float v : tape.branch) CHECK(v == 0.0f);

  // Zero branch contributes nothing to either concatenation point.
  auto without = net;
  for (auto* name : {"dense1.terrain", "dense2.terrain"}) {
    for (auto& v : without.param(name).values) v = 0.0f;
  }
  const auto other_window = oracle::random_vector(rng, 10);
  CHECK(forward(net, x, window) == forward(without, x, other_window));
}

TEST_CASE("forward matches the reference implementation") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = oracle::random_spec(rng);
    const auto net = init_network(spec, std::uint64_t(trial));
    // Non-zero biases exercise the bias path.
    auto biased = net;
    for (auto& t : biased.params()) {
      if (t.name.ends_with(".bias")) t.values = oracle::random_vector(rng, t.size(), 0.3);
    }
    const auto x = oracle::random_vector(rng, spec.input_width);
    std::vector<float> window;
    if (spec.terrain_branch) window = oracle::random_vector(rng, spec.terrain_branch->window);
    const auto y = forward(biased, x, window);
    const auto ref = oracle::ref_forward(biased, oracle::to_double(x), oracle::to_double(window));
    REQUIRE(y.size() == ref.output.size());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(double(y[i]) - ref.output[i]) <= 1e-6);
  }
}

TEST_CASE("forward is bit-identical across calls") {
  const auto net = init_network(small_spec(true), 8);
  Rng rng = make_rng(2);
  const auto x = oracle::random_vector(rng, 5);
  const auto window = oracle::random_vector(rng, 10);
  const auto a = forward(net, x, window);
  for (int i = 0; i < 5; ++i) CHECK(forward(net, x, window) == a);
}

TEST_CASE("forward rejects width mismatches") {
  const auto blind = init_network(small_spec(false), 1);
  const auto sighted = init_network(small_spec(true), 1);
  const std::vector<float> x5(5, 0.1f), x4(4, 0.1f), w10(10, 0.0f), w9(9, 0.0f);
  CHECK_THROWS_AS(forward(blind, x4), ShapeError);
  CHECK_THROWS_AS(forward(blind, x5, w10), ShapeError);
  CHECK_THROWS_AS(forward(sighted, x5), ShapeError);
  CHECK_THROWS_AS(forward(sighted, x5, w9), ShapeError);
  CHECK_NOTHROW(forward(sighted, x5, w10));
}

TEST_CASE("single linear neuron gradient") {
  NetworkSpec s;
  s.input_width = 1;
  s.hidden_widths = {1};
  s.output_width = 1;
  auto net = init_network(s, 1);
  // Positive hidden weight so the ReLU is active, unit readout: y = w x + b.
  net.param("dense0.weight").values = {0.5f};
  net.param("dense1.weight").values = {1.0f};
  const std::vector<float> x{3.0f}, g{1.0f};
  const auto grads = backward(net, forward_tape(net, x), g);
  CHECK(grads[net.layout().dense_weight[0]].values[0] == doctest::Approx(3.0));
  CHECK(grads[net.layout().dense_bias[0]].values[0] == doctest::Approx(1.0));
  CHECK(grads[net.layout().dense_bias[1]].values[0] == doctest::Approx(1.0));
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  const auto net = init_network(small_spec(true), 4);
  Rng rng = make_rng(4);
  const auto tape = forward_tape(net, oracle::random_vector(rng, 5), oracle::random_vector(rng, 10));
  const auto grads = backward(net, tape, std::vector<float>(3, 0.0f));
  for (const auto& t : grads) {
    for (float v : t.values) CHECK(v == 0.0f);
  }
}

TEST_CASE("backward without forward is a usage error") {
  const auto net = init_network(small_spec(false), 4);
  CHECK_THROWS_AS(backward(net, Tape{}, std::vector<float>(3, 1.0f)), UsageError);
}

TEST_CASE("relu subgradient at zero is zero") {
  NetworkSpec s;
  s.input_width = 1;
  s.hidden_widths = {1};
  s.output_width = 1;
  auto net = init_network(s, 1);
  net.param("dense0.weight").values = {1.0f};
  net.param("dense1.weight").values = {1.0f};
  const std::vector<float> x{0.0f}, g{1.0f};
  const auto grads = backward(net, forward_tape(net, x), g);
  CHECK(grads[net.layout().dense_bias[0]].values[0] == 0.0f);
}

TEST_CASE("gradients match finite differences") {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = oracle::random_spec(rng);
    const auto net = init_network(spec, std::uint64_t(100 + trial));
    const auto x = oracle::random_vector(rng, spec.input_width);
    std::vector<float> window;
    if (spec.terrain_branch) window = oracle::random_vector(rng, spec.terrain_branch->window);
    const auto c = oracle::random_vector(rng, spec.output_width);
    const auto r = oracle::check_gradients(net, x, window, c);
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.checked > 0);
  }
}

TEST_CASE("backward is pure") {
  const auto net = init_network(small_spec(true), 6);
  Rng rng = make_rng(6);
  const auto tape = forward_tape(net, oracle::random_vector(rng, 5), oracle::random_vector(rng, 10));
  const std::vector<float> g{0.3f, -1.0f, 2.0f};
  const auto a = backward(net, tape, g);
  const auto b = backward(net, tape, g);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
}

TEST_CASE("sgd with momentum") {
  NetworkSpec s;
  s.input_width = 1;
  s.hidden_widths = {1};
  s.output_width = 1;

  SUBCASE("plain step") {
    auto net = init_network(s, 1);
    net.param("dense0.weight").values = {1.0f};
    auto g = net.zero_gradients();
    g[net.layout().dense_weight[0]].values = {2.0f};
    sgd_momentum_step(net, g, 0.1f, 0.0f);
    CHECK(net.param("dense0.weight").values[0] == doctest::Approx(0.8));
    CHECK(net.update_count() == 1);
  }
  SUBCASE("zero gradient leaves parameters") {
    auto net = init_network(s, 1);
    const auto before = net;
    sgd_momentum_step(net, net.zero_gradients(), 0.1f, 0.9f);
    CHECK(net == before);
  }
  SUBCASE("two momentum steps") {
    auto net = init_network(s, 1);
    const float p0 = net.param("dense0.weight").values[0];
    auto g = net.zero_gradients();
    const float gv = 0.7f, lr = 0.05f;
    g[net.layout().dense_weight[0]].values = {gv};
    sgd_momentum_step(net, g, lr, 0.9f);
    sgd_momentum_step(net, g, lr, 0.9f);
    const double expected = -double(lr) * (gv + (0.9 * gv + gv));
    CHECK(double(net.param("dense0.weight").values[0]) - p0 == doctest::Approx(expected).epsilon(1e-5));
  }
  SUBCASE("shape mismatch") {
    auto net = init_network(s, 1);
    auto g = net.zero_gradients();
    g[0].values.push_back(0.0f);
    g[0].shape[0] = 2;
    CHECK_THROWS_AS(sgd_momentum_step(net, g, 0.1f, 0.9f), ShapeError);
  }
}
