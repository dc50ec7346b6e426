"""Reference network solver: loss coefficients, closed forms, residuals."""

import math

import numpy as np
import pytest

from psrom.oracle import (
    AORTIC_PRESSURE,
    BoundaryConditionError,
    BoundaryConditionSet,
    edge_coefficient_arrays,
    run_anchors,
    segment_loss,
    solution_table,
    solve_network,
    solve_steady,
)
from psrom.ideal import fit_ideal

from conftest import fork_tree, path_tree, random_tree


def make_bc(tree, total_flow=3.0, aortic_pressure=AORTIC_PRESSURE):
    """Outlet resistances sized so a lossless tree carries roughly total_flow,
    split between outlets by the cube of their radii."""
    r3 = {int(k): float(tree.radius[k] ** 3) for k in tree.outlet_ids}
    s = sum(r3.values())
    res = {k: aortic_pressure * s / (total_flow * v) for k, v in r3.items()}
    return BoundaryConditionSet(aortic_pressure=aortic_pressure, outlet_resistance=res)


def lesioned(tree, rng, n_spots=2, severity=0.5):
    radius = tree.radius.copy()
    for _ in range(n_spots):
        i = int(rng.integers(2, tree.n_points - 1))
        radius[i] *= 1.0 - severity
    return tree.with_radii(radius)


def test_poiseuille_coefficient_value():
    # uniform r=0.2 tube of length 1: a = 8*mu*L/(pi*r^4)
    t = path_tree([0.2, 0.2], spacing=1.0)
    a, b = segment_loss(t.segment(1))
    assert a == pytest.approx(8 * 0.04 * 1.0 / (math.pi * 0.2**4), rel=1e-12)
    assert a == pytest.approx(63.6619772, rel=1e-6)
    assert b == 0.0


def test_bernoulli_coefficient_value():
    # constriction 0.2 -> 0.1 over 1 cm
    t = path_tree([0.2, 0.1], spacing=1.0)
    a, b = segment_loss(t.segment(1))
    expect = 0.5 * 1.06 * (1.0 / (math.pi * 0.1**2) ** 2 - 1.0 / (math.pi * 0.2**2) ** 2)
    assert b == pytest.approx(expect, rel=1e-12)
    assert b == pytest.approx(503.44, rel=1e-3)
    assert b > 0


def test_expansion_recovers_kappa_fraction():
    t = path_tree([0.1, 0.2], spacing=1.0)
    full = 0.5 * 1.06 * (1.0 / (math.pi * 0.1**2) ** 2 - 1.0 / (math.pi * 0.2**2) ** 2)
    _, b = segment_loss(t.segment(1), kappa=0.7)
    assert b == pytest.approx(-0.7 * full, rel=1e-12)
    _, b0 = segment_loss(t.segment(1), kappa=0.0)
    assert b0 == 0.0


def test_edge_coefficient_arrays_match_segment_loss(rng):
    t = lesioned(random_tree(rng), rng)
    a, b = edge_coefficient_arrays(t)
    assert a[0] == 0.0 and b[0] == 0.0
    for c in (1, t.n_points // 2, t.n_points - 1):
        sa, sb = segment_loss(t.segment(c))
        assert a[c] == pytest.approx(sa, rel=1e-12)
        assert b[c] == pytest.approx(sb, rel=1e-12)


def test_single_tube_closed_form():
    # one edge with a=800, b=200 against a 10000 outlet at 13332 dyn/cm^2:
    # 200 Q^2 + 10800 Q - 13332 = 0
    t = path_tree([0.2, 0.2])
    a = np.array([0.0, 800.0])
    b = np.array([0.0, 200.0])
    outlet_r = np.array([0.0, 10000.0])
    sol = solve_network(t, a, b, outlet_r, 13332.0)
    q_expect = (-10800.0 + math.sqrt(10800.0**2 + 4 * 200.0 * 13332.0)) / (2 * 200.0)
    assert sol.converged
    assert sol.ostial_flow == pytest.approx(q_expect, rel=1e-3)
    assert sol.ostial_flow == pytest.approx(1.2074, rel=1e-3)
    ffr_expect = 10000.0 * q_expect / 13332.0
    assert sol.ffr[1] == pytest.approx(ffr_expect, rel=1e-3)
    assert sol.ffr[1] == pytest.approx(0.9057, rel=1e-3)


def test_residuals_on_random_trees(rng):
    for _ in range(8):
        t = lesioned(random_tree(rng), rng, n_spots=3)
        bc = make_bc(t, total_flow=float(rng.uniform(1.5, 4.0)))
        sol = solve_steady(t, bc)
        assert sol.converged
        assert sol.pressures[0] == bc.aortic_pressure
        assert sol.ffr[0] == 1.0
        # conservation at bifurcations
        for i in np.flatnonzero(t.is_branch):
            kids = t.children_of(i)
            inflow = sol.ostial_flow if i == 0 else sol.flows[i]
            assert sol.flows[kids].sum() == pytest.approx(inflow, rel=1e-12)
        # outlet law P = R Q
        for k in t.outlet_ids:
            want = bc.outlet_resistance[int(k)] * sol.flows[k]
            assert sol.pressures[k] == pytest.approx(want, rel=1e-8)


def test_pressure_monotone_when_kappa_zero(rng):
    for _ in range(5):
        t = lesioned(random_tree(rng), rng, n_spots=3)
        sol = solve_steady(t, make_bc(t), kappa=0.0)
        drop = sol.pressures[t.parent[1:]] - sol.pressures[1:]
        assert np.all(drop >= -1e-9)


def test_recovery_raises_distal_pressure(rng):
    # a stenosed tube recovers pressure across the expansion when kappa > 0
    radii = np.full(12, 0.15)
    radii[5] = 0.06
    t = path_tree(radii, spacing=0.2)
    bc = BoundaryConditionSet(outlet_resistance={11: 8e4})
    recovered = solve_steady(t, bc, kappa=0.7)
    flat = solve_steady(t, bc, kappa=0.0)
    assert recovered.converged and flat.converged
    # distal of the throat, the kappa=0.7 run sits at higher FFR
    assert recovered.ffr[11] > flat.ffr[11]
    # and the recovery shows as a pressure rise just past the throat
    assert recovered.pressures[6] > recovered.pressures[5]


def test_superemia_scaling():
    bc = BoundaryConditionSet(outlet_resistance={3: 10000.0})
    scaled = bc.scaled(0.6)
    assert scaled.outlet_resistance[3] == pytest.approx(6000.0)
    assert scaled.aortic_pressure == bc.aortic_pressure
    with pytest.raises(BoundaryConditionError):
        bc.scaled(0.0)


def test_bc_validation():
    t = fork_tree([0.3, 0.28], [0.2, 0.2], [0.22, 0.21, 0.2])
    with pytest.raises(BoundaryConditionError, match="missing"):
        BoundaryConditionSet(outlet_resistance={3: 1e4}).validate(t)
    with pytest.raises(BoundaryConditionError, match="extra"):
        BoundaryConditionSet(outlet_resistance={3: 1e4, 6: 1e4, 5: 1e4}).validate(t)
    with pytest.raises(BoundaryConditionError, match="non-positive"):
        BoundaryConditionSet(outlet_resistance={3: 1e4, 6: -2.0}).validate(t)
    with pytest.raises(BoundaryConditionError, match="aortic"):
        BoundaryConditionSet(aortic_pressure=0.0, outlet_resistance={3: 1e4, 6: 1e4}).validate(t)


def test_non_convergence_is_flagged_not_raised():
    t = path_tree([0.2, 0.05, 0.2])
    bc = BoundaryConditionSet(outlet_resistance={2: 5e3})
    sol = solve_steady(t, bc, max_iterations=1)
    assert not sol.converged
    assert sol.iterations == 1


def test_determinism(rng):
    t = lesioned(random_tree(rng), rng)
    bc = make_bc(t)
    s1 = solve_steady(t, bc)
    s2 = solve_steady(t, bc)
    assert s1.pressures.tobytes() == s2.pressures.tobytes()
    assert np.array_equal(s1.flows, s2.flows, equal_nan=True)


def test_run_anchors_and_table(rng):
    # clear 3-point stenosis in the left daughter of a fork
    t = fork_tree([0.25] * 8, [0.18] * 20, [0.2] * 20, spacing=0.15)
    radius = t.radius.copy()
    radius[14:17] *= 0.45
    t = t.with_radii(radius)
    anchors = run_anchors(t, fit_ideal(t).radius, make_bc(t))
    assert anchors.all_converged()
    # superemia moves more flow than hyperemia on both geometries
    assert anchors.patient_super.ostial_flow > anchors.patient_hyper.ostial_flow
    assert anchors.ideal_super.ostial_flow > anchors.ideal_hyper.ostial_flow
    # treating the lesion raises total flow and the FFR at the diseased outlet
    assert anchors.ideal_hyper.ostial_flow > anchors.patient_hyper.ostial_flow
    left_outlet = 27
    assert t.is_outlet[left_outlet]
    assert anchors.ideal_hyper.ffr[left_outlet] > anchors.patient_hyper.ffr[left_outlet] + 0.01
    text = solution_table(t, anchors.patient_hyper)
    lines = text.strip().split("\n")
    assert lines[0].startswith("id,")
    assert len(lines) == t.n_points + 1
