import math

import pytest

import plaid

TINY = """seed: 11
plan:
  tasks: [flat, incline]
  tl_iters: 20
  distill_updates: 20
  episode_limit_steps: 20
network: {hidden_widths: [8]}
train: {max_iters: 20, batch: 4, buffer_capacity: 16, eval_interval_iters: 10, eval_runs: 1}
distill: {batch: 4, buffer_capacity: 64, anneal_updates: 10, curve_interval_updates: 10}
evaluation: {runs: 2}
"""


def blind_spec(out=plaid.ACTION_DIM):
    return plaid.NetworkSpec(plaid.STATE_DIM, [16, 16], out)


def test_injection_preserves_outputs():
    net = plaid.init_network(blind_spec(), seed=3)
    sighted = plaid.attach_terrain_branch(net, seed=4)
    assert sighted.has_terrain_branch
    window = [0.1 * i for i in range(sighted.spec.terrain_branch.window)]
    for k in range(10):
        state = [math.sin(k + i) for i in range(plaid.STATE_DIM)]
        assert sighted.forward(state, window) == net.forward(state)
    for name in net.param_names():
        assert sighted.param(name) == net.param(name)


def test_checkpoint_round_trip(tmp_path):
    net = plaid.init_network(blind_spec(), seed=5)
    assert plaid.Network.load(net.save()) == net
    plaid.write_checkpoint(net, tmp_path / "p.plaidckpt")
    assert plaid.read_checkpoint(tmp_path / "p.plaidckpt") == net
    with pytest.raises(plaid.TruncationError):
        plaid.Network.load(b"short")
    with pytest.raises(plaid.PlaidError):
        plaid.Network.load(b"not a checkpoint at all, just some bytes")


def test_shape_errors():
    net = plaid.init_network(blind_spec(), seed=1)
    with pytest.raises(plaid.ShapeError):
        net.forward([0.0] * (plaid.STATE_DIM - 1))
    with pytest.raises(plaid.ConfigError):
        plaid.NetworkSpec(0, [8], 1)


def test_td_and_ptd():
    assert plaid.td_error(1.0, 2.0, 0.5, 0.9, False) == pytest.approx(2.3)
    assert plaid.td_error(1.0, 2.0, 0.5, 0.9, True) == pytest.approx(0.5)
    assert plaid.ptd_advantage(0.3) == 1.0
    assert plaid.ptd_advantage(0.0) == 0.0
    assert plaid.ptd_advantage(-2.0) == 0.0
    assert plaid.mixing_probability(0) == 1.0
    assert plaid.mixing_probability(5000) == pytest.approx(0.5)
    assert plaid.mixing_probability(20000) == 0.0


def test_terrain_generation_is_seeded():
    a = plaid.generate_terrain("steps", 9)
    assert a == plaid.generate_terrain("steps", 9)
    assert a != plaid.generate_terrain("steps", 10)
    assert a["kind"] == "steps" and a["edges"]
    gaps = plaid.generate_terrain("gaps", 2)
    assert all(end > start for start, end in gaps["gaps"])
    with pytest.raises(plaid.ConfigError):
        plaid.generate_terrain("lava", 1)


def test_env_reset_and_step():
    env = plaid.BipedEnv("flat", episode_limit=5)
    state, window = env.reset(1)
    assert len(state) == plaid.STATE_DIM
    steps = 0
    while True:
        (state, window), reward, terminal, truncated = env.step([0.0] * plaid.ACTION_DIM)
        steps += 1
        assert 0.0 <= reward <= 1.0
        if terminal or truncated:
            break
    assert steps <= 5


def test_metrics():
    assert plaid.relative_change(0.5, 0.25) == pytest.approx(-0.5)
    assert plaid.forgetting_average([-0.2, 0.0, 0.4]) == pytest.approx(-0.1)
    row = [0.89072313686, 0.7997847458, 0.66610235084, 0.60244157756, 0.5289199521]
    assert plaid.row_average(row) == pytest.approx(0.6975943526, abs=1e-9)


def test_tiny_curriculum(tmp_path):
    first = plaid.run_curriculum(TINY, method="plaid", lineage_dir=tmp_path / "a")
    second = plaid.run_curriculum(TINY, method="plaid")
    assert first["method"] == "plaid"
    assert first["tasks"] == ["flat", "incline"]
    assert first["final_eval"] == second["final_eval"]
    assert first["policy"] == second["policy"]
    assert len(first["forgetting"]) == 2
    kinds = [n["kind"] for n in first["nodes"]]
    assert kinds.count("tl") == 2 and kinds.count("distill") == 1
    assert plaid.read_lineage(tmp_path / "a")["final_node"] == first["final_node"]

    path = tmp_path / "final.plaidckpt"
    plaid.write_checkpoint(first["policy"], path)
    mean, std, rewards = plaid.evaluate_checkpoint(path, "incline", runs=3, episode_limit=20)
    assert len(rewards) == 3
    assert mean == pytest.approx(sum(rewards) / 3)

    with pytest.raises(plaid.ConfigError):
        plaid.run_curriculum(TINY, method="bogus")
