"""Disease-free ("ideal") radius profile fit.

Finds the radius profile closest to the measured one under a square-root
deviation penalty, subject to two constraints: radii never increase from the
ostium toward any outlet, and every point stays at or above a per-point lower
bound (the measured radius by default, so lumens are only ever widened).

The fit is exact over a finite candidate grid via dynamic programming on the
tree; a tiny exhaustive search is provided as an independent check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tree import CenterlineTree

#: Default spacing used to refine the candidate radius grid (cm).
GRID_RESOLUTION = 0.0025

_BRUTE_MAX_POINTS = 10
_BRUTE_MAX_VALUES = 12


class IdealFitError(ValueError):
    """Infeasible bounds or an instance outside a solver's envelope."""


@dataclass(frozen=True)
class IdealFitResult:
    radius: np.ndarray
    cost: float
    grid: np.ndarray


def candidate_grid(
    tree: CenterlineTree,
    lower_bounds: np.ndarray | None = None,
    resolution: float | None = GRID_RESOLUTION,
) -> np.ndarray:
    """Sorted candidate radii: union of inputs, bounds, and an even refinement."""
    vals = [tree.radius]
    if lower_bounds is not None:
        vals.append(np.asarray(lower_bounds, dtype=float))
    base = np.concatenate(vals)
    if resolution:
        lo, hi = base.min(), base.max()
        if hi > lo:
            vals.append(np.arange(lo, hi + 0.5 * resolution, resolution))
    return np.unique(np.concatenate(vals))


def _bounds_array(tree: CenterlineTree, lower_bounds) -> np.ndarray:
    if lower_bounds is None:
        return tree.radius.copy()
    m = np.asarray(lower_bounds, dtype=float)
    if m.shape != tree.radius.shape:
        raise IdealFitError("lower_bounds must have one value per point")
    return m


def fit_ideal(
    tree: CenterlineTree,
    lower_bounds: np.ndarray | None = None,
    resolution: float | None = GRID_RESOLUTION,
    grid: np.ndarray | None = None,
) -> IdealFitResult:
    """Exact grid-restricted fit by bottom-up dynamic programming.

    Each point's table holds the optimal subtree cost for every candidate value
    of that point; a prefix minimum turns the child tables into "best child
    cost given my value" lookups, so the whole pass is O(points * grid).
    Ties break toward the larger radius.
    """
    m = _bounds_array(tree, lower_bounds)
    if grid is None:
        grid = candidate_grid(tree, None if lower_bounds is None else m, resolution)
    grid = np.asarray(grid, dtype=float)
    g = grid.shape[0]
    n = tree.n_points

    # prefix_min[c][v] = min over w <= v of cost[c][w]; prefix_arg the matching
    # argmin with ties to the larger w. Rows are freed once the parent consumed
    # them; argmin rows are kept for the top-down readout.
    pending: dict[int, np.ndarray] = {}
    prefix_arg = np.empty((n, g), dtype=np.int32)

    for i in range(n - 1, -1, -1):
        pen = np.sqrt(np.abs(grid - tree.radius[i]))
        pen[grid < m[i]] = np.inf
        for c in tree.children_of(i):
            pen = pen + pending.pop(int(c))
        pm = np.minimum.accumulate(pen)
        # tie -> larger index: a fresh minimum is taken whenever cost <= current min
        fresh = np.empty(g, dtype=bool)
        fresh[0] = True
        fresh[1:] = pen[1:] <= pm[:-1]
        idx = np.where(fresh, np.arange(g), 0)
        prefix_arg[i] = np.maximum.accumulate(idx)
        pending[i] = pm

    root_min = pending.pop(0)
    if not np.isfinite(root_min[-1]):
        raise IdealFitError("infeasible lower bounds: no monotone profile exists on the grid")

    radius = np.empty(n)
    choice = np.empty(n, dtype=np.int64)
    choice[0] = prefix_arg[0, g - 1]
    radius[0] = grid[choice[0]]
    for i in range(1, n):
        cap = choice[tree.parent[i]]
        choice[i] = prefix_arg[i, cap]
        radius[i] = grid[choice[i]]

    cost = float(np.sqrt(np.abs(radius - tree.radius)).sum())
    return IdealFitResult(radius=radius, cost=cost, grid=grid)


def brute_force_ideal(
    tree: CenterlineTree,
    lower_bounds: np.ndarray | None = None,
    grid: np.ndarray | None = None,
    resolution: float | None = GRID_RESOLUTION,
) -> IdealFitResult:
    """Exhaustive search over the same grid. Only for tiny instances."""
    m = _bounds_array(tree, lower_bounds)
    if grid is None:
        grid = candidate_grid(tree, None if lower_bounds is None else m, resolution)
    grid = np.asarray(grid, dtype=float)
    n = tree.n_points
    if n > _BRUTE_MAX_POINTS or grid.shape[0] > _BRUTE_MAX_VALUES:
        raise IdealFitError(
            f"instance too large for exhaustive search ({n} points, {grid.shape[0]} values)"
        )

    best_cost = np.inf
    best: np.ndarray | None = None
    values = np.empty(n)

    def assign(i: int, partial: float) -> None:
        nonlocal best_cost, best
        if partial >= best_cost:
            return
        if i == n:
            best_cost = partial
            best = values.copy()
            return
        cap = values[tree.parent[i]] if i > 0 else np.inf
        for v in grid:
            if v < m[i] or v > cap:
                continue
            values[i] = v
            assign(i + 1, partial + np.sqrt(abs(v - tree.radius[i])))

    assign(0, 0.0)
    if best is None:
        raise IdealFitError("infeasible lower bounds: no monotone profile exists on the grid")
    return IdealFitResult(radius=best, cost=float(best_cost), grid=grid)


def dilated_tree(tree: CenterlineTree, ideal_radius: np.ndarray, fraction: float = 1.0) -> CenterlineTree:
    """Tree with every radius moved ``fraction`` of the way to the ideal profile."""
    ideal_radius = np.asarray(ideal_radius, dtype=float)
    if ideal_radius.shape != tree.radius.shape:
        raise IdealFitError("ideal_radius must have one value per point")
    if not 0.0 <= fraction <= 1.0:
        raise IdealFitError(f"dilation fraction {fraction} outside [0, 1]")
    radius = tree.radius + fraction * (ideal_radius - tree.radius)
    return tree.with_radii(radius, name=f"{tree.name}|dilated{fraction:g}")


def save_profile(path, tree: CenterlineTree, result: IdealFitResult) -> None:
    doc = {
        "format_version": 1,
        "kind": "ideal_profile",
        "tree_name": tree.name,
        "cost": result.cost,
        "radius": result.radius.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_profile(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "ideal_profile":
        raise IdealFitError(f"{path} is not an ideal profile document")
    return np.asarray(doc["radius"], dtype=float)
