"""Compare the compiled and vectorized tree-sweep backends.

Times the three hot kernels and the end-to-end predict step on a large
synthetic tree, once per backend. The compiled backend is selected by default
when numba imports; PSROM_NUMBA=0 forces the vectorized fallback everywhere,
this script simply passes the backend explicitly.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeats N] [--solves N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from psrom import _kernels
from psrom.generator import boundary_conditions, latency_tree
from psrom.ideal import fit_ideal
from psrom.intervention import apply_modification, default_plan, detect_lesions
from psrom.oracle import run_anchors
from psrom.solver import SolverConfig, solve
from psrom.surface import build_surface


def _time_per_call(fn, repeats: int) -> float:
    fn()  # warm up (JIT compile, cache fill)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=5000, help="tree size (default 5000)")
    parser.add_argument("--repeats", type=int, default=200, help="kernel timing repeats")
    parser.add_argument("--solves", type=int, default=50, help="end-to-end solve repeats")
    args = parser.parse_args()

    backends = ["numpy"]
    if _kernels.DEFAULT_BACKEND == "numba":
        backends.insert(0, "numba")
    else:
        print("numba unavailable or disabled; timing the numpy backend only")

    base = latency_tree(args.points)
    radius = base.radius.copy()
    arc = base.arc_from_root
    path = np.asarray(base.path_points(int(base.outlet_ids[0])))
    t = np.clip((arc[path] - 3.0) / 1.0, 0.0, 1.0)
    radius[path] *= 1.0 - 0.55 * np.sin(np.pi * t) ** 2
    patient = base.with_radii(radius)
    bc = boundary_conditions(patient)
    ideal = fit_ideal(patient).radius
    surface = build_surface(run_anchors(patient, ideal, bc))
    lesions = detect_lesions(patient, ideal)
    modified, edges = apply_modification(patient, ideal, default_plan(lesions[0]))

    coeffs = surface.coefficients_for_geometry(modified, edges)
    q = surface.anchor_flows.copy()
    q[0] = 0.0
    r_edge = coeffs.a + coeffs.b * q
    r_edge[0] = 0.0
    outlet_r = bc.resistance_array(modified)

    rows = []
    for backend in backends:
        r_eff, r_down = _kernels.downstream_resistance(modified, r_edge, outlet_r, backend=backend)
        q0 = bc.aortic_pressure / r_eff[0]
        drop = r_edge * q
        drop[0] = 0.0
        timings = {
            "downstream_resistance": _time_per_call(
                lambda: _kernels.downstream_resistance(modified, r_edge, outlet_r, backend=backend),
                args.repeats,
            ),
            "distribute_flow": _time_per_call(
                lambda: _kernels.distribute_flow(
                    modified, q0, r_eff, r_down, gamma=surface.gamma, backend=backend
                ),
                args.repeats,
            ),
            "integrate_pressures": _time_per_call(
                lambda: _kernels.integrate_pressures(modified, drop, bc.aortic_pressure, backend=backend),
                args.repeats,
            ),
            "solve (end to end)": _time_per_call(
                lambda: solve(surface, modified, edges, SolverConfig(backend=backend)),
                args.solves,
            ),
        }
        rows.append((backend, timings))

    names = list(rows[0][1])
    width = max(map(len, names))
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b, _ in rows)
    if len(rows) == 2:
        header += f"  {'speedup':>8}"
    print(f"\n{args.points}-point tree, {args.repeats} kernel repeats, {args.solves} solves")
    print(header)
    print("-" * len(header))
    for name in names:
        cells = "  ".join(f"{timings[name] * 1e6:>9.1f} us" for _, timings in rows)
        line = f"{name:<{width}}  {cells}"
        if len(rows) == 2:
            line += f"  {rows[1][1][name] / rows[0][1][name]:>7.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
