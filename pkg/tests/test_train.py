import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osnet.model import ActivationSpec, OsNet, init_net, regularizer, regularizer_gradient
from osnet.ode import DivergenceError, Trajectory, integrate
from osnet.model import as_field
from osnet.optim import LbfgsConfig
from osnet.train import (TrainConfig, _substeps, adjoint_gradient, loss, normalized_mse, train)
from oracles import central_difference, relative_error

SNAKE = ActivationSpec("snake", 0.7)


def tiny_instance(seed, snapshots=5, act=SNAKE):
    rng = np.random.default_rng(seed)
    net = OsNet(0.7 * rng.standard_normal((3, 4)), 0.7 * rng.standard_normal((4, 4)),
                0.3 * rng.standard_normal(4), act)
    times = np.linspace(0.0, 0.4, snapshots)
    states = rng.standard_normal((snapshots, 3))
    return net, Trajectory(times, states)


def self_generated(net, h=0.01):
    tr = integrate(as_field(net), [0.5, -0.3, 0.2], 0.0, 0.5, h)
    return Trajectory(tr.times[::10], tr.states[::10])


def test_substeps_hit_snapshots():
    assert list(_substeps(np.array([0.0, 0.25, 0.5]), 0.005)) == [50, 50]
    assert list(_substeps(np.array([0.0, 0.012]), 0.005)) == [3]


def test_self_consistent_data_zero_loss():
    net, _ = tiny_instance(0)
    data = self_generated(net)
    cfg = TrainConfig(alpha=0.3, h=0.01)
    val = loss(net, data, cfg)
    assert val.data_loss < 1e-24
    assert val.total == pytest.approx(0.3 * regularizer(net)[0], rel=1e-12)


def test_zero_mismatch_zero_gradient():
    net, _ = tiny_instance(1)
    data = self_generated(net)
    _, g = adjoint_gradient(net, data, TrainConfig(alpha=0.0, h=0.01))
    assert np.abs(g.flat()).max() <= 1e-10


def test_frozen_model_loss():
    net, data = tiny_instance(2)
    frozen = net.replace(K=np.zeros((4, 4)))
    val = loss(frozen, data, TrainConfig(alpha=5.0, h=0.01))
    assert val.data_loss == pytest.approx(np.mean((data.states[1:] - data.states[0]) ** 2), rel=1e-14)
    assert val.reg == 0.0 and val.total == val.data_loss


def test_alpha_zero_total_is_data():
    net, data = tiny_instance(3)
    val = loss(net, data, TrainConfig(alpha=0.0, h=0.01))
    assert val.total == val.data_loss


def test_decomposition_identity():
    net, data = tiny_instance(4)
    val = loss(net, data, TrainConfig(alpha=0.37, h=0.01))
    assert abs(val.total - (val.data_loss + 0.37 * val.reg)) <= 1e-12 * val.total


@pytest.mark.parametrize("act", [SNAKE, ActivationSpec("x_plus_sin")])
def test_adjoint_matches_finite_differences(act):
    for seed in range(5):
        net, data = tiny_instance(seed, act=act)
        cfg = TrainConfig(alpha=0.05, h=0.01)
        val, g = adjoint_gradient(net, data, cfg)
        assert val.total == pytest.approx(loss(net, data, cfg).total, rel=1e-13)
        fd = central_difference(lambda th: loss(net.with_flat(th), data, cfg).total, net.flat())
        assert relative_error(g.flat(), fd) <= 1e-4


def test_regularizer_dominates():
    net, data = tiny_instance(5)
    _, g = adjoint_gradient(net, data, TrainConfig(alpha=1e9, h=0.01))
    _, g_reg = regularizer_gradient(net)
    a, b = g.flat(), g_reg.flat()
    cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    assert 1.0 - cos <= 1e-6


def test_uneven_snapshot_spacing_converges():
    # continuous and discrete gradients differ by O(h^4); the gap must shrink accordingly
    net, data = tiny_instance(6)
    data = Trajectory([0.0, 0.013, 0.05, 0.21, 0.4], data.states)
    errs = []
    for h in (0.01, 0.005):
        cfg = TrainConfig(alpha=0.0, h=h)
        _, g = adjoint_gradient(net, data, cfg)
        fd = central_difference(lambda th: loss(net.with_flat(th), data, cfg).total, net.flat())
        errs.append(np.abs(g.flat() - fd).max())
    assert errs[1] < errs[0] / 10
    assert relative_error(g.flat(), fd) <= 1e-4


def test_divergent_rollout_raises():
    net, data = tiny_instance(7)
    big = net.replace(W=net.W * 40.0)
    data = Trajectory(np.linspace(0, 20, 5), data.states)
    with pytest.raises(DivergenceError):
        loss(big, data, TrainConfig(h=0.05))


def test_data_validation():
    net, data = tiny_instance(8)
    with pytest.raises(ValueError):
        loss(net, Trajectory([0.0], data.states[:1]), TrainConfig())
    with pytest.raises(ValueError):
        loss(net, Trajectory(data.times, data.states[:, :2]), TrainConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(alpha=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(h=0.0)
    assert TrainConfig(warmup_epochs=4).window_fraction(1) == pytest.approx(0.2)
    assert TrainConfig(warmup_epochs=4).window_fraction(7) == 1.0
    assert TrainConfig().window_fraction(1) == 1.0


def small_problem():
    truth = init_net(3, 6, ActivationSpec("snake", 0.5), 11)
    tr = integrate(as_field(truth), [1.0, 0.0, -0.5], 0.0, 2.0, 0.01)
    data = Trajectory(tr.times[::20], tr.states[::20])
    return init_net(3, 6, ActivationSpec("snake", 0.5), 3), data


def test_train_reduces_loss_and_reports():
    net, data = small_problem()
    cfg = TrainConfig(alpha=0.01, epochs=3, h=0.02, lbfgs=LbfgsConfig(inner_iterations=8))
    start = loss(net, data, cfg).total
    logged = []
    out, rep = train(net, data, cfg, log=logged.append)
    assert len(rep.epochs) == 3 and len(logged) == 3
    assert rep.epochs[-1].total_loss < start
    totals = [e.total_loss for e in rep.epochs]
    assert all(b <= a + 1e-15 for a, b in zip(totals, totals[1:]))
    for e in rep.epochs:
        assert abs(e.total_loss - (e.data_loss + cfg.alpha * e.reg_value)) <= 1e-12 * e.total_loss
    assert rep.j_a_norm == pytest.approx(regularizer(out)[1])
    lo, hi = rep.omega_entry_range
    assert lo == out.omega.min() and hi == out.omega.max() and lo == -hi
    assert rep.normalized_mse == pytest.approx(normalized_mse(loss(out, data, cfg).data_loss, data))
    d = rep.to_dict()
    assert set(d) == {"epochs", "final"} and len(d["epochs"]) == 3
    assert {"data_loss", "reg_value", "total_loss", "gradient_norm", "line_search_evals"} <= set(d["epochs"][0])
    assert {"j_a_norm", "wall_time", "omega_entry_range"} <= set(d["final"])


def test_train_deterministic():
    net, data = small_problem()
    cfg = TrainConfig(alpha=0.01, epochs=2, h=0.02, warmup_epochs=1, lbfgs=LbfgsConfig(inner_iterations=4))
    a_net, a = train(net, data, cfg)
    b_net, b = train(net, data, cfg)
    strip = lambda r: {k: v for k, v in r.to_dict()["final"].items() if k != "wall_time"}
    assert np.array_equal(a_net.flat(), b_net.flat())
    assert a.to_dict()["epochs"] == b.to_dict()["epochs"] and strip(a) == strip(b)


def test_zero_epochs_returns_input():
    net, data = small_problem()
    out, rep = train(net, data, TrainConfig(epochs=0))
    assert np.array_equal(out.flat(), net.flat()) and rep.epochs == []


def test_warmup_windows_grow():
    net, data = small_problem()
    cfg = TrainConfig(epochs=3, h=0.02, warmup_epochs=2, lbfgs=LbfgsConfig(inner_iterations=2))
    _, rep = train(net, data, cfg)
    ends = [e.window_end for e in rep.epochs]
    assert ends[0] < ends[1] < ends[2] == data.times[-1]


def test_divergent_start_flagged():
    net, data = small_problem()
    bad = net.replace(W=net.W * 60.0)
    long = Trajectory(data.times * 20, data.states)
    out, rep = train(bad, long, TrainConfig(epochs=2, h=0.2))
    assert rep.diverged and rep.epochs[0].status == "diverged"
    assert math.isinf(rep.epochs[0].total_loss)


def test_normalized_mse():
    data = Trajectory([0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    var = np.mean([np.var([0, 1, 2]), np.var([0, 2, 4])])
    assert normalized_mse(0.5, data) == pytest.approx(0.5 / var)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_property(seed):
    # stiff draws keep an O(h^4) gap to the discrete loss; it must keep shrinking
    net, data = tiny_instance(seed)
    errs = []
    for h in (0.005, 0.0025):
        cfg = TrainConfig(alpha=0.1, h=h)
        try:
            _, g = adjoint_gradient(net, data, cfg)
        except DivergenceError:
            return
        fd = central_difference(lambda th: loss(net.with_flat(th), data, cfg).total, net.flat())
        errs.append(relative_error(g.flat(), fd))
        if errs[0] <= 1e-4:
            return
    assert errs[1] <= 1e-4 and errs[1] <= errs[0] / 8
