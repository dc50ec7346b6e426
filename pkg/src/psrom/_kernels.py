"""Flat-array tree sweeps shared by the reference solver and the fast predictor.

Two interchangeable backends:

* ``numba``: per-point loops compiled with ``@njit``. Default when numba
  imports cleanly.
* ``numpy``: chain-vectorized sweeps (series runs between bifurcations are
  processed with cumulative sums). Selected with ``PSROM_NUMBA=0``.

Point ids are topologically ordered, so a descending id loop visits children
before parents and an ascending loop visits parents first; the numpy backend
exploits the same property at chain granularity.
"""

from __future__ import annotations

import os

import numpy as np

from .tree import CenterlineTree

#: Accumulated branch resistance is floored here. Fitted recovery edges can
#: carry negative local resistance; the floor only guards the total so the
#: parallel combination and the flow split stay defined.
RESISTANCE_FLOOR = 1e-9

_env = os.environ.get("PSROM_NUMBA", "1").strip().lower()
_WANT_NUMBA = _env not in ("0", "false", "no", "off")

try:  # pragma: no cover - exercised implicitly by backend selection
    if _WANT_NUMBA:
        from numba import njit
    else:
        njit = None
except ImportError:  # pragma: no cover
    njit = None

DEFAULT_BACKEND = "numba" if njit is not None else "numpy"


def backend_name() -> str:
    """Backend used when no explicit override is passed."""
    return DEFAULT_BACKEND


# -- point-loop sweeps (numba path) -------------------------------------------


def _acc_resistance_loop(parent, is_branch, is_outlet, r_edge, outlet_r, floor, r_eff, r_down, inv_acc):
    n = parent.shape[0]
    for i in range(n - 1, 0, -1):
        if is_outlet[i]:
            r_eff[i] = outlet_r[i]
        elif is_branch[i]:
            r_eff[i] = 1.0 / inv_acc[i]
        rd = r_edge[i] + r_eff[i]
        if rd < floor:
            rd = floor
        r_down[i] = rd
        p = parent[i]
        if is_branch[p]:
            inv_acc[p] += 1.0 / rd
        else:
            r_eff[p] = rd


def _distribute_loop(starts, flat, r_eff, r_down, gamma, q0, q, flow_at):
    flow_at[0] = q0
    n = flow_at.shape[0]
    for i in range(n):
        a = starts[i]
        b = starts[i + 1]
        if b - a == 1:
            c = flat[a]
            q[c] = flow_at[i]
            flow_at[c] = flow_at[i]
        elif b - a == 2:
            c1 = flat[a]
            c2 = flat[a + 1]
            q1 = flow_at[i] * r_eff[i] / r_down[c1] * gamma[c1]
            q2 = flow_at[i] * r_eff[i] / r_down[c2] * gamma[c2]
            scale = flow_at[i] / (q1 + q2)
            q[c1] = q1 * scale
            q[c2] = q2 * scale
            flow_at[c1] = q[c1]
            flow_at[c2] = q[c2]


def _pressure_loop(parent, drop, p_aorta, p):
    p[0] = p_aorta
    for i in range(1, parent.shape[0]):
        p[i] = p[parent[i]] - drop[i]


if njit is not None:
    _acc_resistance_loop = njit(cache=True)(_acc_resistance_loop)
    _distribute_loop = njit(cache=True)(_distribute_loop)
    _pressure_loop = njit(cache=True)(_pressure_loop)


# -- chain-vectorized sweeps (numpy path) --------------------------------------


def _acc_resistance_chains(tree: CenterlineTree, r_edge, outlet_r, floor, r_eff, r_down):
    parent = tree.parent
    branch = tree.is_branch
    inv_acc = np.zeros(tree.n_points)
    for chain in reversed(tree.chains):
        tail = int(chain[-1])
        if tree.is_outlet[tail]:
            tail_reff = outlet_r[tail]
        else:
            tail_reff = 1.0 / inv_acc[tail]
        r_eff[tail] = tail_reff
        vals = r_edge[chain[::-1]].copy()
        vals[0] += tail_reff
        acc = np.cumsum(vals)
        if np.any(acc < floor):
            # floor interacts with the running sum; redo this chain stepwise
            run = float(tail_reff)
            for k in range(chain.shape[0] - 1, -1, -1):
                c = int(chain[k])
                rd = r_edge[c] + run
                if rd < floor:
                    rd = floor
                r_down[c] = rd
                run = rd
                if k:
                    r_eff[chain[k - 1]] = rd
        else:
            acc = acc[::-1]
            r_down[chain] = acc
            if chain.shape[0] > 1:
                r_eff[chain[:-1]] = acc[1:]
        head = int(chain[0])
        p = int(parent[head])
        if branch[p]:
            inv_acc[p] += 1.0 / r_down[head]
        else:
            r_eff[p] = r_down[head]


def _distribute_chains(tree: CenterlineTree, r_eff, r_down, gamma, q0, q):
    parent = tree.parent
    branch = tree.is_branch
    pending: dict[int, float] = {}
    flow_at = {0: float(q0)}
    for chain in tree.chains:
        head = int(chain[0])
        p = int(parent[head])
        if branch[p]:
            if head not in pending:
                c1, c2 = (int(c) for c in tree.children_of(p))
                fp = flow_at[p]
                q1 = fp * r_eff[p] / r_down[c1] * gamma[c1]
                q2 = fp * r_eff[p] / r_down[c2] * gamma[c2]
                scale = fp / (q1 + q2)
                pending[c1] = q1 * scale
                pending[c2] = q2 * scale
            q_chain = pending.pop(head)
        else:
            q_chain = flow_at[p]
        q[chain] = q_chain
        flow_at[int(chain[-1])] = q_chain


def _pressure_chains(tree: CenterlineTree, drop, p_aorta, p):
    p[0] = p_aorta
    for chain in tree.chains:
        head_parent = int(tree.parent[chain[0]])
        p[chain] = p[head_parent] - np.cumsum(drop[chain])


# -- public entry points --------------------------------------------------------


def _resolve(backend: str | None) -> str:
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and njit is None:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def downstream_resistance(
    tree: CenterlineTree,
    r_edge: np.ndarray,
    outlet_r: np.ndarray,
    floor: float = RESISTANCE_FLOOR,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Leaf-to-ostium accumulation of downstream resistance.

    Returns ``(r_eff, r_down)``: ``r_eff[i]`` is the effective resistance from
    point ``i`` to ground (outlets carry their boundary value, bifurcations
    combine daughters in parallel), ``r_down[c]`` is the branch resistance seen
    from the parent of ``c`` through edge ``c``, floored at ``floor``.
    """
    n = tree.n_points
    r_eff = np.zeros(n)
    r_down = np.zeros(n)
    if _resolve(backend) == "numba":
        inv_acc = np.zeros(n)
        _acc_resistance_loop(
            tree.parent, tree.is_branch, tree.is_outlet, r_edge, outlet_r, floor, r_eff, r_down, inv_acc
        )
    else:
        _acc_resistance_chains(tree, r_edge, outlet_r, floor, r_eff, r_down)
    return r_eff, r_down


def distribute_flow(
    tree: CenterlineTree,
    q0: float,
    r_eff: np.ndarray,
    r_down: np.ndarray,
    gamma: np.ndarray | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """Ostium-to-leaf flow distribution.

    Daughter flows follow the effective-resistance split scaled by ``gamma``
    and are renormalized so each bifurcation conserves mass exactly. Returns
    per-edge flows indexed by child id; entry 0 is NaN (the root has no edge).
    """
    n = tree.n_points
    q = np.empty(n)
    q[0] = np.nan
    if gamma is None:
        gamma = np.ones(n)
    if _resolve(backend) == "numba":
        starts, flat = tree.children
        flow_at = np.zeros(n)
        _distribute_loop(starts, flat, r_eff, r_down, gamma, q0, q, flow_at)
    else:
        _distribute_chains(tree, r_eff, r_down, gamma, q0, q)
    return q


def integrate_pressures(
    tree: CenterlineTree,
    drop: np.ndarray,
    p_aorta: float,
    backend: str | None = None,
) -> np.ndarray:
    """Proximal-to-distal pressure integration: P[c] = P[parent] - drop[c]."""
    p = np.empty(tree.n_points)
    if _resolve(backend) == "numba":
        _pressure_loop(tree.parent, drop, p_aorta, p)
    else:
        _pressure_chains(tree, drop, p_aorta, p)
    return p


def warmup(backend: str | None = None) -> None:
    """Compile/then-run the sweeps once on a toy tree so first real use is fast."""
    toy = CenterlineTree(
        name="warmup",
        source="",
        parent=np.array([-1, 0, 1, 2, 2]),
        arc_length=np.array([0.0, 0.1, 0.1, 0.1, 0.1]),
        radius=np.array([0.2, 0.2, 0.2, 0.15, 0.15]),
        is_outlet=np.array([False, False, False, True, True]),
    )
    r_edge = np.full(5, 10.0)
    outlet_r = np.where(toy.is_outlet, 1e4, 0.0)
    r_eff, r_down = downstream_resistance(toy, r_edge, outlet_r, backend=backend)
    q = distribute_flow(toy, 1.0, r_eff, r_down, backend=backend)
    drop = np.where(np.isnan(q), 0.0, r_edge * q)
    integrate_pressures(toy, drop, 1.333e5, backend=backend)
