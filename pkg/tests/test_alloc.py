import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecsched import alloc
from mecsched.sysmodel import (ChannelState, SystemConfig, Task, check_feasibility,
                               compute_channel, random_topology)

CFG = SystemConfig()
TASK = Task.from_kb(1e9, 100)

# argmin of the power objective on a 1e-4 W grid over (0, 1.5], default system values
GRID_P_STAR_H5E6 = 0.9145


def test_power_without_energy_weight_is_max():
    cfg = SystemConfig(phi_t=1.0, phi_e=0.0)
    assert alloc.optimize_power(TASK, 5e-6, cfg) == pytest.approx(cfg.p_iotd_max)


def test_power_interior_for_strong_channel():
    for h in (1e-3, 1e-2):
        p = alloc.optimize_power(TASK, h, CFG)
        grid = np.arange(1, 15001) * 1e-4
        oracle = grid[np.argmin(alloc.power_objective(grid, TASK, h, CFG))]
        assert p < CFG.p_iotd_max
        assert abs(p - oracle) <= 1e-3


def test_power_reference_channel_matches_grid_oracle():
    assert alloc.optimize_power(TASK, 5e-6, CFG) == pytest.approx(GRID_P_STAR_H5E6, abs=1e-4)


def test_power_beats_endpoint_probes():
    rng = np.random.default_rng(3)
    for h in CFG.beta0 * rng.exponential(size=200) / rng.uniform(1, 2500, 200):
        p = alloc.optimize_power(TASK, h, CFG)
        best = alloc.power_objective(p, TASK, h, CFG)
        for probe in (CFG.p_iotd_max, CFG.p_iotd_max / 2):
            assert best <= alloc.power_objective(probe, TASK, h, CFG) * (1 + 1e-12)


def test_compute_split_examples():
    assert np.allclose(alloc.allocate_compute([1e9, 4e9], 50e9), [50e9 / 3, 100e9 / 3])
    assert np.allclose(alloc.allocate_compute([2e9] * 4, 8e9), [2e9] * 4)
    assert np.allclose(alloc.allocate_compute([3e9], 50e9), [50e9])
    assert alloc.allocate_compute([], 50e9).size == 0


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(1e6, 1e11), min_size=1, max_size=20), st.randoms())
def test_compute_split_exhausts_budget_and_is_equivariant(cycles, rnd):
    f = alloc.allocate_compute(cycles, 50e9)
    assert f.sum() == pytest.approx(50e9, rel=1e-9)
    perm = list(range(len(cycles)))
    rnd.shuffle(perm)
    g = alloc.allocate_compute([cycles[i] for i in perm], 50e9)
    assert np.allclose(g, f[perm], rtol=1e-12)


def test_subproblem_single_assignee():
    sol = alloc.solve_mec_subproblem([(TASK, 5e-6)], CFG)
    assert sol.f[0] == CFG.f_mec_max
    assert sol.p[0] == alloc.optimize_power(TASK, 5e-6, CFG)


def test_subproblem_symmetric_assignees():
    sol = alloc.solve_mec_subproblem([(TASK, 2e-6), (TASK, 2e-6)], CFG)
    assert sol.f[0] == sol.f[1] and sol.p[0] == sol.p[1]


def test_subproblem_empty():
    sol = alloc.solve_mec_subproblem([], CFG)
    assert sol.cost == 0.0 and sol.f.size == 0


def _instance(rng, k):
    tasks = [Task.from_kb(rng.uniform(0.5e9, 2e9), rng.uniform(50, 200)) for _ in range(k)]
    gains = CFG.beta0 * rng.exponential(size=k) / rng.uniform(1, 2500, k)
    return list(zip(tasks, gains))


def test_subproblem_three_assignees_matches_grid_oracle():
    rng = np.random.default_rng(11)
    inst = _instance(rng, 3)
    heur = alloc.solve_mec_subproblem(inst, CFG).cost
    oracle = alloc.brute_force_alloc(inst, CFG).cost
    assert abs(heur - oracle) / oracle <= 5e-3


def test_subproblem_not_worse_than_uniform_allocation():
    rng = np.random.default_rng(12)
    for _ in range(50):
        inst = _instance(rng, int(rng.integers(1, 8)))
        k = len(inst)
        sol = alloc.solve_mec_subproblem(inst, CFG)
        uniform = alloc._assignee_cost([t for t, _ in inst], np.array([h for _, h in inst]),
                                       np.full(k, CFG.f_mec_max / k), np.full(k, CFG.p_iotd_max),
                                       CFG)
        assert sol.cost <= uniform * (1 + 1e-12)


def test_oracle_limits_and_basic_cases():
    with pytest.raises(alloc.OracleScale):
        alloc.brute_force_alloc([(TASK, 1e-6)] * 4, CFG)
    assert alloc.brute_force_alloc([], CFG).cost == 0.0
    single = alloc.brute_force_alloc([(TASK, 5e-6)], CFG)
    ref = alloc.solve_mec_subproblem([(TASK, 5e-6)], CFG)
    assert single.f[0] == CFG.f_mec_max
    assert single.cost == pytest.approx(ref.cost, rel=1e-6)


def test_oracle_recovers_square_root_split():
    tasks = [Task.from_kb(1e9, 100), Task.from_kb(4e9, 100)]
    sol = alloc.brute_force_alloc(list(zip(tasks, [1e-6, 1e-6])), CFG, resolution=99)
    assert np.allclose(sol.f, [50e9 / 3, 100e9 / 3], rtol=0.02)


def test_oracle_agreement_on_random_instances():
    rng = np.random.default_rng(13)
    for _ in range(30):
        inst = _instance(rng, int(rng.integers(1, 4)))
        heur = alloc.solve_mec_subproblem(inst, CFG).cost
        oracle = alloc.brute_force_alloc(inst, CFG).cost
        assert abs(heur - oracle) / oracle <= 5e-3


def test_solve_allocation_is_feasible_and_local_devices_use_device_values():
    rng = np.random.default_rng(14)
    topo = random_topology(CFG, rng)
    ch = compute_channel(topo, CFG)
    a = rng.integers(0, 3, CFG.n_iotd)
    d = alloc.solve_allocation(a, ch, [TASK] * CFG.n_iotd, CFG)
    assert check_feasibility(d, CFG) == []
    assert np.all(d.f_alloc[a == 0] == CFG.f_local)
    for j in (1, 2):
        if np.any(a == j):
            assert d.f_alloc[a == j].sum() == pytest.approx(CFG.f_mec_max)


def test_exhaustive_assignment_finds_minimum():
    cfg = SystemConfig(n_iotd=3, n_mec=2)
    rng = np.random.default_rng(15)
    ch = ChannelState(cfg.beta0 * rng.exponential(size=(3, 2)) / rng.uniform(1, 500, (3, 2)))
    tasks = [TASK] * 3
    best_a, best = alloc.exhaustive_assignment(ch, tasks, cfg)
    assert best == pytest.approx(alloc.assignment_cost(best_a, ch, tasks, cfg)[1].total)
    for code in range(27):
        a = np.array([code % 3, code // 3 % 3, code // 9])
        assert alloc.assignment_cost(a, ch, tasks, cfg)[1].total >= best - 1e-12
    with pytest.raises(alloc.OracleScale):
        alloc.exhaustive_assignment(ChannelState(np.ones((30, 2))), [TASK] * 30, CFG)
