"""Acceptance gate: nine end-to-end checks, one printed PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see every line; each test
also asserts, so the suite fails loudly when a check regresses.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import fork_tree, path_tree
from psrom.generator import boundary_conditions, case_stream, latency_tree
from psrom.harness import (
    ComparisonRecord,
    HarnessConfig,
    compute_stats,
    export_report,
    export_summaries,
    run_batch,
    runtime_histogram,
)
from psrom.ideal import brute_force_ideal, fit_ideal
from psrom.intervention import apply_modification, default_plan, detect_lesions
from psrom.oracle import BoundaryConditionSet, run_anchors, solve_steady
from psrom.solver import SolverConfig, solve
from psrom.stats import FFR_BUCKET_EDGES, ffr_bucket
from psrom.surface import alpha, beta, beta_printed_coefficients, build_surface
from psrom.tree import CenterlineTree


def _criterion(n: int, label: str, ok: bool, detail: str = "") -> None:
    state = "PASS" if ok else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    print(f"criterion {n} ({label}): {state}{suffix}", flush=True)
    assert ok, f"criterion {n} ({label}) failed{suffix}"


@pytest.fixture(scope="module")
def cohort():
    """Shared 200-case validation batch for the equivalence criteria."""
    t0 = time.perf_counter()
    result = run_batch(HarnessConfig(seed=1, n_cases=200))
    return result, time.perf_counter() - t0


def test_criterion_1_anchor_exactness():
    # replaying each of the four reference states through the reduced model
    # must reproduce the full solve pointwise; tol2 is tightened so the
    # stopping rule is not the thing under test
    t0 = time.perf_counter()
    cfg = SolverConfig(tol2=1e-6, bc_scaling_enabled=False)
    worst = 0.0
    for case in case_stream(301, 50):
        ideal = fit_ideal(case.tree).radius
        anchors = run_anchors(case.tree, ideal, case.bc)
        assert anchors.all_converged(), case.case_id
        surface = build_surface(anchors)
        ideal_tree = surface.ideal_tree
        runs = (
            (solve(surface, config=cfg), anchors.patient_hyper),
            (solve(surface, config=cfg, bc=surface.bc_superemia), anchors.patient_super),
            (solve(surface, ideal_tree, (), cfg), anchors.ideal_hyper),
            (solve(surface, ideal_tree, (), cfg, bc=surface.bc_superemia), anchors.ideal_super),
        )
        for res, truth in runs:
            assert res.converged, case.case_id
            worst = max(worst, float(np.max(np.abs(res.solution.ffr - truth.ffr))))
    elapsed = time.perf_counter() - t0
    _criterion(
        1,
        "anchor exactness",
        worst <= 0.005 and elapsed < 120.0,
        f"50 patients x 4 states, max |FFR err| {worst:.2e}, {elapsed:.1f} s",
    )


def test_criterion_2_cohort_equivalence(cohort):
    result, elapsed = cohort
    n_cases = len({r.case_id for r in result.records})
    summaries, _ = compute_stats(result.records, "none")
    s = summaries["all"]
    ok = (
        n_cases >= 200
        and abs(s.bias) <= 0.01
        and s.standard_deviation <= 0.02
        and s.tost_p < 0.05
        and s.chisq_p < 0.05
        and s.pearson_r >= 0.98
        and elapsed < 600.0
    )
    _criterion(
        2,
        "cohort equivalence",
        ok,
        f"{n_cases} cases, n={s.n}, bias {s.bias:+.5f}, sd {s.standard_deviation:.5f}, "
        f"r {s.pearson_r:.4f}, tost_p {s.tost_p:.3g}, chisq_p {s.chisq_p:.3g}, {elapsed:.1f} s",
    )


def test_criterion_3_stratified_margins(cohort, tmp_path):
    result, _ = cohort
    expected_buckets = {
        ffr_bucket(0.5 * (lo + hi))
        for lo, hi in zip(FFR_BUCKET_EDGES[:-1], FFR_BUCKET_EDGES[1:])
    }
    failures = []
    shapes = []
    for stratify in ("lesion", "ffr"):
        summaries, notes = compute_stats(result.records, stratify)
        table = export_summaries(tmp_path / f"{stratify}.csv", summaries, notes, stratify)
        assert table.exists() and table.stat().st_size > 0
        for name, s in summaries.items():
            if abs(s.bias) > 0.01 or s.standard_deviation > 0.02:
                failures.append(f"{stratify}/{name}")
        if stratify == "ffr":
            assert set(summaries) <= expected_buckets
        shapes.append(f"{stratify}:{len(summaries)}")
    _criterion(
        3,
        "stratified margins",
        not failures,
        f"strata {' '.join(shapes)}, margin failures: {failures or 'none'}",
    )


def test_criterion_4_ideal_fit_optimality():
    rng = np.random.default_rng(20260819)
    worst_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 9))
        radii = rng.uniform(0.05, 0.3, n).round(3)
        if rng.uniform() < 0.5:
            tree = path_tree(radii)
        else:
            split = int(rng.integers(1, n - 1)) if n > 2 else 1
            trunk, rest = radii[: split + 1], radii[split + 1 :]
            half = len(rest) // 2
            left = list(rest[:half]) or [float(radii[-1])]
            right = list(rest[half:]) or [float(radii[-1])]
            tree = fork_tree(list(trunk), left, right)
        extra = rng.uniform(0.05, 0.32, int(rng.integers(0, 3))).round(3)
        grid = np.unique(np.concatenate([np.unique(tree.radius), extra]))[:10]
        if grid.max() < tree.radius.max():
            grid = np.unique(np.append(grid, tree.radius.max()))[:10]
        dp = fit_ideal(tree, grid=grid)
        bf = brute_force_ideal(tree, grid=grid)
        worst_gap = max(worst_gap, abs(dp.cost - bf.cost))

    mono_ok = True
    for seed in range(5):
        r2 = np.random.default_rng(100 + seed)
        base = latency_tree(1000)
        radius = base.radius * (1.0 + r2.uniform(-0.15, 0.05, base.n_points))
        arc = base.arc_from_root
        for _ in range(3):
            out = int(r2.choice(base.outlet_ids))
            path = np.asarray(base.path_points(out))
            lo = r2.uniform(0.5, arc[out] - 1.5)
            t = np.clip((arc[path] - lo) / r2.uniform(0.5, 1.5), 0.0, 1.0)
            radius[path] *= 1.0 - r2.uniform(0.3, 0.6) * np.sin(np.pi * t) ** 2
        tree = base.with_radii(np.maximum(radius, 0.02))
        res = fit_ideal(tree)
        mono_ok &= bool(np.all(res.radius[1:] <= res.radius[tree.parent[1:]] + 1e-12))
        mono_ok &= bool(np.all(res.radius >= tree.radius - 1e-12))
    _criterion(
        4,
        "ideal-fit optimality",
        worst_gap <= 1e-9 and mono_ok,
        f"100 exhaustive matches, max objective gap {worst_gap:.1e}, "
        f"1000-point monotone fits: {'ok' if mono_ok else 'violated'}",
    )


def test_criterion_5_interpolant_identities():
    rng = np.random.default_rng(20260819)
    worst_alpha = worst_beta = worst_printed = 0.0
    n_printed = 0
    for _ in range(10_000):
        r_orig = rng.uniform(0.08, 0.3)
        r_ideal = r_orig * rng.uniform(1.02, 2.0)
        worst_alpha = max(
            worst_alpha,
            abs(alpha(r_orig, r_orig, r_ideal) - 1.0),
            abs(alpha(r_ideal, r_orig, r_ideal)),
        )

        area_orig = math.pi * rng.uniform(0.08, 0.3) ** 2
        area_ideal = math.pi * rng.uniform(0.08, 0.3) ** 2
        darea_orig = rng.uniform(-0.3, 0.3)
        darea_ideal = rng.uniform(-0.3, 0.3)
        g_orig = darea_orig / area_orig**3
        g_ideal = darea_ideal / area_ideal**3
        if g_orig == g_ideal:
            continue
        worst_beta = max(
            worst_beta,
            abs(beta(g_orig, g_orig, g_ideal) - 1.0),
            abs(beta(g_ideal, g_orig, g_ideal)),
        )
        # the expanded two-coefficient form divides by the ideal gradient, so
        # compare only where it is well defined
        well_separated = abs(g_orig - g_ideal) >= 1e-3 * (abs(g_orig) + abs(g_ideal))
        if abs(darea_ideal) >= 0.01 and well_separated:
            n_printed += 1
            b0, b1 = beta_printed_coefficients(area_orig, darea_orig, area_ideal, darea_ideal)
            g = g_ideal + rng.uniform(0.0, 1.0) * (g_orig - g_ideal)
            worst_printed = max(worst_printed, abs((b0 * g + b1) - beta(g, g_orig, g_ideal)))
    ok = worst_alpha <= 1e-12 and worst_beta <= 1e-12 and worst_printed <= 1e-10
    _criterion(
        5,
        "interpolant identities",
        ok,
        f"10000 draws, alpha err {worst_alpha:.1e}, beta err {worst_beta:.1e}, "
        f"two-form beta err {worst_printed:.1e} over {n_printed}",
    )


def test_criterion_6_closed_form_tube():
    # geometry reverse-engineered so the fitted laws are exactly a=800, b=200
    mu, rho = 0.04, 1.06
    a_t, b_t, res_out, p_aorta = 800.0, 200.0, 10000.0, 13332.0
    r_prox = 0.2
    area_prox = math.pi * r_prox**2
    area_dist = 1.0 / math.sqrt(1.0 / area_prox**2 + b_t / (0.5 * rho))
    r_dist = math.sqrt(area_dist / math.pi)
    r_mean = 0.5 * (r_prox + r_dist)
    length = a_t * math.pi * r_mean**4 / (8.0 * mu)
    tube = CenterlineTree(
        name="tube",
        source="acceptance",
        parent=np.array([-1, 0]),
        arc_length=np.array([0.0, length]),
        radius=np.array([r_prox, r_dist]),
        is_outlet=np.array([False, True]),
    )
    bc = BoundaryConditionSet(aortic_pressure=p_aorta, outlet_resistance={1: res_out})

    q_root = (-(a_t + res_out) + math.sqrt((a_t + res_out) ** 2 + 4 * b_t * p_aorta)) / (2 * b_t)
    ffr_root = res_out * q_root / p_aorta
    assert q_root == pytest.approx(1.2074, abs=1e-4)
    assert ffr_root == pytest.approx(0.9057, abs=1e-4)

    oracle = solve_steady(tube, bc)
    anchors = run_anchors(tube, fit_ideal(tube).radius, bc)
    rom = solve(build_surface(anchors)).solution
    errs = {
        "oracle Q": abs(oracle.ostial_flow / q_root - 1.0),
        "oracle FFR": abs(oracle.ffr[1] / ffr_root - 1.0),
        "rom Q": abs(rom.ostial_flow / q_root - 1.0),
        "rom FFR": abs(rom.ffr[1] / ffr_root - 1.0),
    }
    worst = max(errs.values())
    _criterion(
        6,
        "closed-form tube",
        worst <= 1e-3,
        f"Q {q_root:.4f}, FFR {ffr_root:.4f}, worst rel err {worst:.1e}",
    )


def test_criterion_7_silent_lesion():
    # severe focal lesion with a mild tandem lesion far enough downstream to
    # clear the recovery zone; treating the severe one starves the tandem
    n = 161
    arc = np.linspace(0.0, 8.0, n)
    radius = 0.22 - 0.012 * arc
    for lo, hi, severity in ((1.5, 2.1, 0.82), (5.0, 5.6, 0.35)):
        t = np.clip((arc - lo) / (hi - lo), 0.0, 1.0)
        radius = radius * (1.0 - severity * np.sin(np.pi * t) ** 2)
    outlet = np.zeros(n, dtype=bool)
    outlet[-1] = True
    tree = CenterlineTree(
        name="tandem",
        source="acceptance",
        parent=np.arange(-1, n - 1),
        arc_length=np.diff(arc, prepend=0.0),
        radius=radius,
        is_outlet=outlet,
    )
    bc = boundary_conditions(tree)
    ideal = fit_ideal(tree).radius
    anchors = run_anchors(tree, ideal, bc)
    surface = build_surface(anchors)
    lesions = detect_lesions(tree, ideal)
    assert len(lesions) == 2
    severe = max(lesions, key=lambda l: l.max_narrowing)
    tandem = min(lesions, key=lambda l: l.max_narrowing)
    modified, edges = apply_modification(tree, ideal, default_plan(severe))

    members = np.asarray(tandem.member_point_ids)
    prox = int(members[np.argmin(tree.arc_from_root[members])])
    dist = int(members[np.argmax(tree.arc_from_root[members])])

    cfg = SolverConfig(bc_scaling_enabled=False)
    pre_oracle = solve_steady(tree, bc)
    post_oracle = solve_steady(modified, bc)
    pre_rom = solve(surface, config=cfg).solution
    post_rom = solve(surface, modified, edges, cfg).solution

    def drop(sol):
        return float(sol.pressures[prox] - sol.pressures[dist])

    oracle_grows = drop(post_oracle) > drop(pre_oracle)
    rom_grows = drop(post_rom) > drop(pre_rom)
    ffr_gap = abs(post_rom.ffr[dist] - post_oracle.ffr[dist])
    _criterion(
        7,
        "silent lesion",
        oracle_grows and rom_grows and ffr_gap <= 0.02,
        f"tandem drop oracle {drop(pre_oracle):.0f}->{drop(post_oracle):.0f}, "
        f"rom {drop(pre_rom):.0f}->{drop(post_rom):.0f}, post FFR gap {ffr_gap:.4f}",
    )


def test_criterion_8_predict_latency():
    base = latency_tree(5000)
    radius = base.radius.copy()
    arc = base.arc_from_root
    path = np.asarray(base.path_points(int(base.outlet_ids[0])))
    t = np.clip((arc[path] - 3.0) / 1.0, 0.0, 1.0)
    radius[path] *= 1.0 - 0.55 * np.sin(np.pi * t) ** 2
    patient = base.with_radii(radius)
    ideal = fit_ideal(patient).radius
    anchors = run_anchors(patient, ideal, boundary_conditions(patient))
    surface = build_surface(anchors)
    lesions = detect_lesions(patient, ideal)
    assert lesions
    modified, edges = apply_modification(patient, ideal, default_plan(lesions[0]))

    records = []
    for k in range(100):
        t0 = time.perf_counter()
        res = solve(surface, modified, edges)
        dt = time.perf_counter() - t0
        assert res.converged
        records.append(
            ComparisonRecord(
                case_id="latency",
                lesion_kind="focal",
                eval_point=int(path[-1]),
                ffr_oracle=1.0,
                ffr_psrom=1.0,
                delta=0.0,
                ffr_pre_modification=1.0,
                psrom_runtime=dt,
                flagged=False,
            )
        )
    ms = np.array([r.psrom_runtime for r in records]) * 1e3
    median, p99 = float(np.median(ms)), float(np.percentile(ms, 99))
    bins = " ".join(
        f"[{lo:g},{hi:g}):{count}" for lo, hi, count in runtime_histogram(records) if count
    )
    print(f"predict runtime histogram (ms): {bins}", flush=True)
    _criterion(
        8,
        "predict latency",
        median < 50.0 and p99 < 250.0,
        f"5000-point tree, 100 runs, median {median:.1f} ms, p99 {p99:.1f} ms",
    )


def test_criterion_9_deterministic_reports(tmp_path):
    config = HarnessConfig(seed=7, n_cases=20)
    digests = []
    for run in ("first", "second"):
        result = run_batch(config)
        summaries, notes = compute_stats(result.records, "none")
        out = tmp_path / run
        paths = export_report(out, result.records, summaries, notes, result.dropped)
        digests.append(
            {
                name: paths[name].read_bytes()
                for name in ("comparisons", "summaries", "dropped")
            }
        )
    same = {name: digests[0][name] == digests[1][name] for name in digests[0]}
    _criterion(
        9,
        "deterministic reports",
        all(same.values()),
        f"seed 7 twice, byte-equal: {', '.join(f'{k}={v}' for k, v in same.items())}",
    )
