"""Tree sweep kernels: hand-checked values and numba/numpy backend agreement."""

import numpy as np
import pytest

from psrom import _kernels as K

from conftest import fork_tree, path_tree, random_tree

BACKENDS = ["numpy"] + (["numba"] if K.DEFAULT_BACKEND == "numba" else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def test_series_accumulation_single_tube(backend):
    # two edges of 400 and 600 in series with a 10000 outlet: 11000 total
    t = path_tree([0.2, 0.2, 0.2])
    r_edge = np.array([0.0, 400.0, 600.0])
    outlet_r = np.array([0.0, 0.0, 10000.0])
    r_eff, r_down = K.downstream_resistance(t, r_edge, outlet_r, backend=backend)
    assert r_eff[0] == pytest.approx(11000.0)
    assert r_down[2] == pytest.approx(10600.0)
    assert r_down[1] == pytest.approx(11000.0)


def test_parallel_combination_at_branch(backend):
    # daughters of 100 and 300 (edge + outlet) combine harmonically to 75
    t = fork_tree([0.3, 0.3], [0.2], [0.2])
    r_edge = np.array([0.0, 0.0, 40.0, 100.0])
    outlet_r = np.array([0.0, 0.0, 60.0, 200.0])
    r_eff, r_down = K.downstream_resistance(t, r_edge, outlet_r, backend=backend)
    assert r_down[2] == pytest.approx(100.0)
    assert r_down[3] == pytest.approx(300.0)
    assert r_eff[0] == pytest.approx(75.0)


def test_flow_split_follows_resistance_ratio(backend):
    t = fork_tree([0.3, 0.3], [0.2], [0.2])
    r_eff = np.array([75.0, 75.0, 0.0, 0.0])
    r_down = np.array([0.0, 0.0, 100.0, 300.0])
    q = K.distribute_flow(t, 4.0, r_eff, r_down, backend=backend)
    assert q[2] == pytest.approx(3.0)
    assert q[3] == pytest.approx(1.0)
    assert q[1] == pytest.approx(4.0)
    assert np.isnan(q[0])


def test_gamma_bias_is_renormalized(backend):
    t = fork_tree([0.3, 0.3], [0.2], [0.2])
    r_eff = np.array([75.0, 75.0, 0.0, 0.0])
    r_down = np.array([0.0, 0.0, 100.0, 300.0])
    gamma = np.array([1.0, 1.0, 2.0, 1.0])
    q = K.distribute_flow(t, 4.0, r_eff, r_down, gamma=gamma, backend=backend)
    # raw: 6 and 1, renormalized to sum to 4
    assert q[2] == pytest.approx(4.0 * 6.0 / 7.0)
    assert q[3] == pytest.approx(4.0 / 7.0)
    assert q[2] + q[3] == pytest.approx(4.0)


def test_pressure_integration(backend):
    t = path_tree([0.2, 0.2, 0.2])
    drop = np.array([0.0, 500.0, 250.0])
    p = K.integrate_pressures(t, drop, 10000.0, backend=backend)
    assert p.tolist() == [10000.0, 9500.0, 9250.0]


def test_resistance_floor_guards_negative_runs(backend):
    # middle edge strongly negative: accumulated branch resistance is floored
    t = path_tree([0.2, 0.2, 0.2])
    r_edge = np.array([0.0, 50.0, -2000.0])
    outlet_r = np.array([0.0, 0.0, 1000.0])
    r_eff, r_down = K.downstream_resistance(t, r_edge, outlet_r, floor=1e-9, backend=backend)
    assert r_down[2] == pytest.approx(1e-9)
    assert r_down[1] == pytest.approx(50.0, rel=1e-6)


def test_backends_agree_on_random_trees(rng):
    if K.DEFAULT_BACKEND != "numba":
        pytest.skip("numba backend unavailable")
    for _ in range(15):
        t = random_tree(rng)
        n = t.n_points
        r_edge = rng.uniform(1.0, 500.0, n)
        r_edge[rng.uniform(size=n) < 0.1] *= -0.2  # sprinkle mild recovery edges
        r_edge[0] = 0.0
        outlet_r = np.where(t.is_outlet, rng.uniform(5e3, 5e4, n), 0.0)
        gamma = np.where(np.arange(n) > 0, rng.uniform(0.8, 1.2, n), 1.0)
        got = {}
        for b in ("numba", "numpy"):
            r_eff, r_down = K.downstream_resistance(t, r_edge, outlet_r, backend=b)
            q = K.distribute_flow(t, 3.0, r_eff, r_down, gamma=gamma, backend=b)
            drop = np.where(np.arange(n) > 0, r_edge * q, 0.0)
            p = K.integrate_pressures(t, drop, 1.333e5, backend=b)
            got[b] = (r_eff, r_down, q, p)
        for a, b in zip(got["numba"], got["numpy"]):
            np.testing.assert_allclose(a[1:], b[1:], rtol=1e-9)


def test_flow_conservation_property(rng, backend):
    for _ in range(10):
        t = random_tree(rng)
        n = t.n_points
        r_edge = rng.uniform(1.0, 500.0, n)
        r_edge[0] = 0.0
        outlet_r = np.where(t.is_outlet, rng.uniform(5e3, 5e4, n), 0.0)
        r_eff, r_down = K.downstream_resistance(t, r_edge, outlet_r, backend=backend)
        q = K.distribute_flow(t, 2.5, r_eff, r_down, backend=backend)
        for i in range(n):
            kids = t.children_of(i)
            if kids.size == 2:
                inflow = 2.5 if i == 0 else q[i]
                assert q[kids].sum() == pytest.approx(inflow, rel=1e-12)
        assert q[t.outlet_ids].sum() == pytest.approx(2.5, rel=1e-12)


def test_warmup_runs():
    K.warmup()
