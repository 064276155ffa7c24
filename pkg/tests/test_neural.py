import math

import numpy as np
import pytest

from mecsched.neural import (HIDDEN, AgentNet, DimensionMismatch, adam_step, forward,
                             load_nets, loss_and_grad, predict_action, save_nets)


def test_default_architecture():
    net = AgentNet.create(30, np.random.default_rng(0))
    assert net.layer_dims == (30, *HIDDEN, 30) == (30, 30, 80, 60, 30)
    assert AgentNet.create(12, np.random.default_rng(0)).layer_dims == (12, 30, 80, 60, 12)
    for w, (a, b) in zip(net.weights, zip(net.layer_dims, net.layer_dims[1:])):
        assert np.all(np.abs(w) <= math.sqrt(6 / (a + b)))


def test_zero_parameters_output_one_half():
    net = AgentNet.zeros((5, 4, 5))
    assert np.all(forward(net, np.arange(5.0)) == 0.5)


def test_outputs_bounded_and_deterministic():
    rng = np.random.default_rng(1)
    net = AgentNet.create(8, rng)
    x = rng.normal(0, 3, (100, 8))
    out = forward(net, x)
    assert out.shape == (100, 8) and np.all((out > 0) & (out < 1))
    assert np.array_equal(out, forward(net, x))


def test_forward_rejects_wrong_width():
    net = AgentNet.create(4, np.random.default_rng(2))
    with pytest.raises(DimensionMismatch):
        forward(net, np.zeros(5))


def test_single_demo_row_cross_entropy():
    net = AgentNet.zeros((1, 1))
    rep, _ = loss_and_grad(net, [[0.3]], [[1.0]], [True], 0.0, 0.0)
    assert rep.demo == pytest.approx(0.6931, abs=1e-4)
    assert rep.total == pytest.approx(math.log(2), rel=1e-12)


def test_perfect_predictions_leave_only_regularizer():
    net = AgentNet.zeros((1, 1))
    net.biases[0][:] = 40.0  # sigmoid saturates at 1, clipped to 1 - 1e-7
    rep, _ = loss_and_grad(net, [[0.0]], [[1.0]], [True], 1e-3, 0.0)
    assert rep.demo == pytest.approx(1e-7, rel=1e-3)
    assert rep.total == pytest.approx(1e-3 * 1600 + rep.demo)


def test_loss_decomposition():
    rng = np.random.default_rng(3)
    net = AgentNet.create(4, rng, hidden=(5,))
    x = rng.normal(size=(6, 4))
    y = (rng.random((6, 4)) < 0.5).astype(float)
    flags = np.array([1, 1, 1, 0, 0, 0], bool)
    plain, _ = loss_and_grad(net, x, y, flags, 0.0, 0.0)
    assert plain.total == plain.demo
    agent_only, _ = loss_and_grad(net, x, y, np.zeros(6, bool), 0.0, 1.0)
    assert agent_only.demo == 0.0 and agent_only.total == agent_only.agent
    full, _ = loss_and_grad(net, x, y, flags, 1e-3, 0.5)
    assert full.total == pytest.approx(full.demo + 1e-3 * full.l2 + 0.5 * full.agent)


def _fd_worst(net, x, y, flags, lam1, lam2, h=1e-5):
    _, grads = loss_and_grad(net, x, y, flags, lam1, lam2)
    worst = 0.0
    for p, g in zip(net.params(), grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = loss_and_grad(net, x, y, flags, lam1, lam2)[0].total
            p[idx] = orig - h
            down = loss_and_grad(net, x, y, flags, lam1, lam2)[0].total
            p[idx] = orig
            fd = (up - down) / (2 * h)
            scale = max(abs(fd), abs(g[idx]))
            if scale > 1e-8:
                worst = max(worst, abs(fd - g[idx]) / scale)
    return worst


def test_gradient_five_parameter_toy_net():
    rng = np.random.default_rng(4)
    net = AgentNet.create(2, rng, hidden=(1,), n_outputs=1)
    net.biases[0][:] = 0.3
    assert sum(p.size for p in net.params()) == 5
    x = rng.normal(size=(4, 2))
    y = np.array([[1.0], [0.0], [1.0], [0.0]])
    assert _fd_worst(net, x, y, np.array([1, 0, 1, 0], bool), 1e-2, 0.5) <= 1e-4


def test_gradient_every_layer_on_random_nets():
    rng = np.random.default_rng(5)
    for _ in range(5):
        net = AgentNet.create(4, rng, hidden=(6, 5, 3))
        for b in net.biases:
            b += rng.normal(0, 0.1, b.shape)
        x = rng.normal(size=(5, 4))
        y = (rng.random((5, 4)) < 0.5).astype(float)
        assert _fd_worst(net, x, y, rng.random(5) < 0.5, 1e-3, 0.7) <= 1e-4


def test_adam_zero_gradient_is_noop():
    net = AgentNet.create(3, np.random.default_rng(6), hidden=(4,))
    before = [p.copy() for p in net.params()]
    adam_step(net, [np.zeros_like(p) for p in net.params()])
    assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


def test_adam_first_step_and_sign_behavior():
    net = AgentNet.create(3, np.random.default_rng(7), hidden=(4,))
    before = [p.copy() for p in net.params()]
    grads = [np.full_like(p, -0.37) if k % 2 else np.full_like(p, 2.5)
             for k, p in enumerate(net.params())]
    adam_step(net, grads, lr=1e-3)
    for b, p, g in zip(before, net.params(), grads):
        assert np.allclose(p - b, -1e-3 * np.sign(g), rtol=1e-6)
    for _ in range(50):
        adam_step(net, grads, lr=1e-3)
    for b, p, g in zip(before, net.params(), grads):
        assert np.all(np.sign(p - b) == -np.sign(g))


def test_adam_rejects_shape_mismatch():
    net = AgentNet.create(3, np.random.default_rng(8), hidden=(4,))
    with pytest.raises(DimensionMismatch):
        adam_step(net, [np.zeros(1)] * len(net.params()))


def test_predict_action_threshold():
    net = AgentNet.zeros((1, 3))
    net.biases[0][:] = [math.log(0.7 / 0.3), 0.0, -1.0]
    probs, action = predict_action(net, [0.0])
    assert probs[0] == pytest.approx(0.7) and probs[1] == 0.5
    assert action.tolist() == [1, 1, 0]
    assert np.array_equal(probs, forward(net, [0.0]))


def test_training_drives_demo_loss_below_point_one():
    rng = np.random.default_rng(9)
    net = AgentNet.create(30, rng)
    x = rng.normal(size=(256, 30))
    y = (rng.random((256, 30)) < 0.4).astype(float)
    flags = np.ones(256, bool)
    for _ in range(3000):
        rep, grads = loss_and_grad(net, x, y, flags, 0.0, 0.0)
        if rep.demo < 0.1:
            break
        adam_step(net, grads, lr=1e-3)
    assert rep.demo < 0.1


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    nets = [AgentNet.create(6, rng) for _ in range(3)]
    grads = loss_and_grad(nets[0], rng.normal(size=(4, 6)), np.ones((4, 6)), [True] * 4,
                          1e-4, 0.0)[1]
    adam_step(nets[0], grads)
    save_nets(tmp_path / "agents.npz", nets)
    loaded = load_nets(tmp_path / "agents.npz")
    x = rng.normal(size=(7, 6))
    for a, b in zip(nets, loaded):
        assert a.layer_dims == b.layer_dims
        assert np.array_equal(forward(a, x), forward(b, x))
        assert b.adam.t == a.adam.t
        assert all(np.array_equal(u, v) for u, v in zip(a.adam.m, b.adam.m))


def test_copy_is_independent():
    net = AgentNet.create(3, np.random.default_rng(11), hidden=(2,))
    twin = net.copy()
    twin.weights[0][:] = 0
    assert not np.array_equal(net.weights[0], twin.weights[0])
