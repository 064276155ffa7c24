import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecsched.sysmodel import (ChannelState, CostBreakdown, GlobalDecision, InfeasibleDecision,
                               SystemConfig, Task, Topology, check_feasibility,
                               compute_channel, data_rate, evaluate, grid_mec_positions,
                               local_exec_power, random_topology, reward)

CFG = SystemConfig()
ONE = SystemConfig(n_iotd=1, n_mec=1)
TASK = Task.from_kb(1e9, 100)


def test_default_system_values():
    assert (CFG.bandwidth, CFG.noise_density, CFG.f_local) == (1e6, 1e-12, 1e9)
    assert (CFG.f_mec_max, CFG.p_iotd_max, CFG.kappa, CFG.v_exp) == (50e9, 1.5, 1e-27, 3.0)
    assert CFG.noise_power == pytest.approx(1e-6)
    assert SystemConfig(noise_times_bandwidth=False).noise_power == 1e-12


@pytest.mark.parametrize("kw", [dict(bandwidth=0), dict(v_exp=0.5), dict(phi_t=0, phi_e=0),
                                dict(kappa=-1), dict(n_iotd=-1), dict(min_distance=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SystemConfig(**kw)


def test_task_kilobytes_to_bits():
    assert TASK.data_bits == 8e5
    with pytest.raises(ValueError):
        Task(0, 1)


def test_channel_reference_example():
    topo = Topology([[0, 0]], [[10, 10]], [[1.0]])
    assert compute_channel(topo, ONE).gains[0, 0] == pytest.approx(5.0e-6, rel=1e-12)


def test_channel_clamps_colocated_devices():
    topo = Topology([[3, 3]], [[3, 3]], [[0.7]])
    assert compute_channel(topo, ONE).gains[0, 0] == pytest.approx(CFG.beta0 * 0.7)


def test_channel_inverse_square():
    near = compute_channel(Topology([[0, 0]], [[3, 4]], [[1.0]]), ONE).gains[0, 0]
    far = compute_channel(Topology([[0, 0]], [[6, 8]], [[1.0]]), ONE).gains[0, 0]
    assert near / far == pytest.approx(4.0)


def test_data_rate_examples():
    assert data_rate(1.5, 5e-6, CFG) == pytest.approx(1e6 * math.log2(8.5), rel=1e-12)
    assert data_rate(1.5, 5e-6, CFG) == pytest.approx(3.0875e6, rel=1e-4)
    assert data_rate(0.0, 5e-6, CFG) == 0.0
    assert data_rate(1.0, 1e-6, CFG) == pytest.approx(CFG.bandwidth)


def test_local_exec_power_examples():
    assert local_exec_power(CFG) == pytest.approx(1.0)
    assert local_exec_power(SystemConfig(kappa=0.0)) == 0.0
    assert local_exec_power(SystemConfig(v_exp=1.0, kappa=1e-9)) == pytest.approx(1.0)


def _channel(n, m, value=5e-6):
    return ChannelState(np.full((n, m), value))


def test_evaluate_all_local_reference():
    cost = evaluate(GlobalDecision.all_local(CFG), [TASK] * 30, _channel(30, 2), CFG)
    assert cost.total == pytest.approx(30.0)
    assert np.allclose(cost.per_device_time, 1.0) and np.allclose(cost.per_device_energy, 1.0)


def test_evaluate_single_offloader_reference():
    cfg = SystemConfig(n_iotd=1, n_mec=1)
    dec = GlobalDecision(np.array([1]), np.array([25e9]), np.array([1.5]))
    cost = evaluate(dec, [TASK], _channel(1, 1), cfg)
    assert cost.per_device_time[0] == pytest.approx(8e5 / 3.0875e6 + 0.04, rel=1e-4)
    assert cost.per_device_time[0] == pytest.approx(0.2991, abs=1e-4)
    assert cost.per_device_energy[0] == pytest.approx(1.5 * 8e5 / (1e6 * math.log2(8.5)))


def test_evaluate_empty_population():
    cfg = SystemConfig(n_iotd=0, n_mec=2)
    cost = evaluate(GlobalDecision.all_local(cfg), [], ChannelState(np.zeros((0, 2))), cfg)
    assert cost.total == 0.0


def test_evaluate_rejects_infeasible():
    cfg = SystemConfig(n_iotd=2, n_mec=1)
    dec = GlobalDecision(np.array([1, 1]), np.array([30e9, 30e9]), np.array([1.0, 1.0]))
    with pytest.raises(InfeasibleDecision):
        evaluate(dec, [TASK] * 2, _channel(2, 1), cfg)


def test_evaluate_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(GlobalDecision.all_local(CFG), [TASK] * 29, _channel(30, 2), CFG)


def test_reward_examples():
    def c(total):
        return CostBreakdown(np.zeros(1), np.zeros(1), np.array([total]), total)

    assert reward(c(30.0)) == pytest.approx(1 / 30)
    assert reward(c(1.0)) == 1.0
    assert reward(c(0.9)) > reward(c(1.0))


def test_feasibility_examples():
    cfg = SystemConfig(n_iotd=2, n_mec=1)
    over = GlobalDecision(np.array([1, 1]), np.array([30e9, 30e9]), np.array([1.0, 1.0]))
    assert [v.constraint for v in check_feasibility(over, cfg)] == ["compute"]
    hot = GlobalDecision(np.array([1, 0]), np.array([10e9, 1e9]), np.array([2.0, 1.0]))
    assert [v.constraint for v in check_feasibility(hot, cfg)] == ["power"]
    assert check_feasibility(GlobalDecision.all_local(cfg), cfg) == []


def test_feasibility_flags_local_power_above_limit():
    cfg = SystemConfig(n_iotd=1, n_mec=1, kappa=2e-27)
    assert check_feasibility(GlobalDecision.all_local(cfg), cfg)


def test_feasibility_flags_bad_placement_and_zero_compute():
    cfg = SystemConfig(n_iotd=2, n_mec=1)
    dec = GlobalDecision(np.array([2, 1]), np.array([1e9, 0.0]), np.array([1.0, 1.0]))
    kinds = sorted(v.constraint for v in check_feasibility(dec, cfg))
    assert kinds == ["compute", "placement"]


def test_nearest_mec_ties_go_to_lowest_index():
    topo = Topology([[25, 25], [0, 0]], [[20, 25], [30, 25]], np.ones((2, 2)))
    assert topo.nearest_mec().tolist() == [1, 1]


def test_grid_layout_cells():
    assert np.allclose(grid_mec_positions(2, 50), [[12.5, 25], [37.5, 25]])
    assert np.allclose(grid_mec_positions(1, 50), [[25, 25]])
    pos = grid_mec_positions(7, 50)
    assert pos.shape == (7, 2) and np.all((pos > 0) & (pos < 50))


def test_random_topology_within_square():
    rng = np.random.default_rng(0)
    for layout in ("grid", "random"):
        topo = random_topology(CFG, rng, layout)
        for pos in (topo.iotd_pos, topo.mec_pos):
            assert np.all((pos >= 0) & (pos <= CFG.area_side))
        assert np.all(topo.fading > 0)
    with pytest.raises(ValueError):
        random_topology(CFG, rng, "hex")


def test_channel_state_validation():
    with pytest.raises(ValueError):
        ChannelState(np.array([[1.0, -1.0]]))
    with pytest.raises(ValueError):
        ChannelState(np.array([[np.inf]]))


def _random_decision(rng, n, m):
    a = rng.integers(0, m + 1, n)
    f = np.full(n, CFG.f_local)
    p = np.full(n, local_exec_power(CFG))
    for j in range(1, m + 1):
        idx = np.flatnonzero(a == j)
        if idx.size:
            f[idx] = CFG.f_mec_max * rng.dirichlet(np.ones(idx.size))
            p[idx] = rng.uniform(0.01, CFG.p_iotd_max, idx.size)
    return GlobalDecision(a, f, p)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12), scale=st.floats(1.01, 100))
def test_properties_additivity_purity_and_channel_scaling(seed, n, scale):
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(n_iotd=n, n_mec=2)
    tasks = [Task.from_kb(rng.uniform(1e8, 2e9), rng.uniform(10, 300)) for _ in range(n)]
    ch = ChannelState(cfg.beta0 * rng.exponential(size=(n, 2)) / rng.uniform(1, 2500, (n, 2)))
    dec = _random_decision(rng, n, 2)
    a, b = evaluate(dec, tasks, ch, cfg), evaluate(dec, tasks, ch, cfg)
    assert a.total == b.total and np.array_equal(a.per_device_cost, b.per_device_cost)
    assert a.total == pytest.approx(np.sum(a.per_device_cost), rel=1e-12)
    assert np.allclose(a.per_device_cost, cfg.phi_t * a.per_device_time
                       + cfg.phi_e * a.per_device_energy, rtol=1e-12)
    better = evaluate(dec, tasks, ChannelState(ch.gains * scale), cfg)
    assert better.total <= a.total * (1 + 1e-12)
    local = dec.assign == 0
    assert np.array_equal(better.per_device_cost[local], a.per_device_cost[local])
