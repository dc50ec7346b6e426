"""Synthetic coronary trees with implanted lesions for validation batches.

A case is a healthy, distally tapering bifurcation tree with one to four
smooth narrowings written into its radius profile. The healthy profile is
kept alongside the diseased tree so the batch runner can grade the ideal-fit
stage, and outlet resistances are sized from the healthy outlet calibers so
hyperemic flow splits roughly by Murray's law. Everything is drawn from one
seeded generator, so a seed fully determines the case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .intervention import Lesion, detect_lesions
from .oracle import AORTIC_PRESSURE, BoundaryConditionSet
from .tree import CenterlineTree

#: Steerable lesion archetypes; "serial" implants three lesions on one path.
LESION_KINDS = ("focal", "ostial", "bifurcation", "serial")


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic cohort; defaults give desk-scale cases."""

    spacing: float = 0.05
    depth: tuple[int, int] = (2, 4)
    segment_length: tuple[float, float] = (2.5, 5.0)
    root_radius: tuple[float, float] = (0.15, 0.25)
    daughter_ratio: tuple[float, float] = (0.65, 0.85)
    segment_taper: tuple[float, float] = (0.90, 0.98)
    min_radius: float = 0.05
    lesion_kind: str | None = None
    extra_lesions: tuple[int, int] = (0, 2)
    narrowing: tuple[float, float] = (0.3, 0.8)
    lesion_length: tuple[float, float] = (0.5, 2.0)
    #: Minimum arc gap between lesions sharing a path. Kept above the solver's
    #: 2.0 cm recovery window plus stent blending so treating one lesion never
    #: rewrites its neighbour's entrance.
    lesion_gap: float = 2.4
    #: Minimum arc left between a lesion's end and every downstream outlet,
    #: so a probe point past the recovery window always exists.
    outlet_margin: float = 2.8
    aortic_pressure: float = AORTIC_PRESSURE
    #: Hyperemic inflow through a 0.2 cm root; scaled by (root radius / 0.2)^3.
    reference_flow: float = 3.0


@dataclass(frozen=True)
class SyntheticCase:
    """One generated patient: diseased tree, healthy truth, and closure."""

    case_id: str
    seed: int
    tree: CenterlineTree
    healthy_radius: np.ndarray
    bc: BoundaryConditionSet
    kind: str
    implants: tuple[dict, ...]
    lesions: tuple[Lesion, ...]


def _grow_healthy(rng: np.random.Generator, cfg: GeneratorConfig, depth_target: int):
    """Recursive healthy tree: linear in-segment taper, caliber step at forks."""
    parent = [-1]
    arc = [0.0]
    radius = [float(rng.uniform(*cfg.root_radius))]
    outlet = [False]

    def chain(tip: int, r_prox: float, level: int) -> None:
        length = float(rng.uniform(*cfg.segment_length))
        n = max(2, int(round(length / cfg.spacing)))
        taper = float(rng.uniform(*cfg.segment_taper))
        r_end = max(cfg.min_radius, r_prox * taper)
        rr = np.linspace(r_prox, r_end, n + 1)[1:]
        for k in range(n):
            parent.append(tip)
            tip = len(parent) - 1
            arc.append(cfg.spacing)
            radius.append(float(rr[k]))
            outlet.append(False)
        if level >= depth_target:
            outlet[tip] = True
            return
        ratios = rng.uniform(*cfg.daughter_ratio, size=2)
        kids = [radius[tip] * float(f) for f in ratios]
        if min(kids) < cfg.min_radius * 1.1:
            outlet[tip] = True
            return
        for rk in kids:
            chain(tip, rk, level + 1)

    chain(0, radius[0], 0)
    return CenterlineTree(
        name="synthetic",
        source="generator",
        parent=np.asarray(parent, dtype=np.int64),
        arc_length=np.asarray(arc, dtype=np.float64),
        radius=np.asarray(radius, dtype=np.float64),
        is_outlet=np.asarray(outlet, dtype=np.bool_),
    )


def boundary_conditions(tree: CenterlineTree, cfg: GeneratorConfig | None = None) -> BoundaryConditionSet:
    """Outlet resistances splitting a root-scaled hyperemic inflow by r^3."""
    cfg = cfg or GeneratorConfig()
    r_out = tree.radius[tree.outlet_ids]
    total = float(cfg.reference_flow) * (float(tree.radius[0]) / 0.2) ** 3
    weights = r_out**3
    q = total * weights / weights.sum()
    resistance = {int(k): float(cfg.aortic_pressure / qk) for k, qk in zip(tree.outlet_ids, q)}
    return BoundaryConditionSet(aortic_pressure=cfg.aortic_pressure, outlet_resistance=resistance)


def _conflicts(tree, path_sets, pts_new, interval_new, implants, gap):
    """True when the window sits closer than ``gap`` to a path-sharing lesion."""
    s_new, e_new = interval_new
    new_set = set(int(p) for p in pts_new)
    for imp in implants:
        old_set = imp["_points"]
        for ps in path_sets:
            if not new_set.isdisjoint(ps) and not old_set.isdisjoint(ps):
                if max(imp["arc_start"] - e_new, s_new - imp["arc_end"]) < gap:
                    return True
                break
    return False


def _window_points(tree, path, s, e):
    arc = tree.arc_from_root
    sel = path[(arc[path] >= s - 1e-9) & (arc[path] <= e + 1e-9)]
    return sel


def _margin_ok(tree, path_sets, outlet_arc, pts, e, margin):
    pts_set = set(int(p) for p in pts)
    for ps, oa in zip(path_sets, outlet_arc):
        if not pts_set.isdisjoint(ps) and oa - e < margin:
            return False
    return True


def _branch_free(tree, path, s, e, pad=0.1):
    arc = tree.arc_from_root
    on = path[(arc[path] >= s - pad) & (arc[path] <= e + pad)]
    return not bool(np.any(tree.is_branch[on]))


def _carve(radius: np.ndarray, tree: CenterlineTree, path: np.ndarray, s: float, e: float, severity: float) -> np.ndarray:
    pts = _window_points(tree, path, s, e)
    arc = tree.arc_from_root[pts]
    t = (arc - s) / (e - s)
    radius[pts] = radius[pts] * (1.0 - severity * np.sin(math.pi * t) ** 2)
    return pts


def _implant(tree, radius, path, s, e, severity):
    pts = _carve(radius, tree, path, s, e, severity)
    return {
        "path_id": int(path[-1]),
        "arc_start": float(s),
        "arc_end": float(e),
        "severity": float(severity),
        "_points": set(int(p) for p in pts),
    }


def _scan_place(rng, tree, path, length, lo, hi, path_sets, outlet_arc, implants, cfg, need_branch_free=True):
    """Random starts first, then a deterministic sweep; None when nothing fits."""
    arc = tree.arc_from_root
    out_arc = float(arc[path[-1]])
    hi = min(hi, out_arc - cfg.outlet_margin - length)
    if hi <= lo:
        return None
    starts = list(rng.uniform(lo, hi, size=12)) + list(np.arange(lo, hi, 0.1))
    for s in starts:
        e = s + length
        if need_branch_free and not _branch_free(tree, path, s, e):
            continue
        pts = _window_points(tree, path, s, e)
        if pts.size < 3:
            continue
        if not _margin_ok(tree, path_sets, outlet_arc, pts, e, cfg.outlet_margin):
            continue
        if _conflicts(tree, path_sets, pts, (s, e), implants, cfg.lesion_gap):
            continue
        return float(s), float(e)
    return None


def generate_synthetic_patient(seed: int, config: GeneratorConfig | None = None):
    """Deterministic diseased tree plus the parameters that made it.

    Returns ``(tree, params)`` where params carries the healthy radius
    profile, the outlet closure, the implanted narrowing windows, and the
    detected lesion labels for stratification.
    """
    cfg = config or GeneratorConfig()
    rng = np.random.default_rng(seed)

    kind = cfg.lesion_kind or str(rng.choice(LESION_KINDS))
    if kind not in LESION_KINDS:
        raise ValueError(f"unknown lesion kind {kind!r}")

    depth = int(rng.integers(cfg.depth[0], cfg.depth[1] + 1))
    grow_cfg = cfg
    if kind == "serial":
        # three separated lesions need a long main vessel
        depth = max(depth, 3)
        lo_seg = max(cfg.segment_length[0], 3.5)
        grow_cfg = replace(cfg, segment_length=(lo_seg, max(cfg.segment_length[1], lo_seg + 0.5)))
    healthy = _grow_healthy(rng, grow_cfg, depth)

    paths = healthy.paths()
    path_sets = [set(int(p) for p in path) for path in paths]
    arc = healthy.arc_from_root
    outlet_arc = [float(arc[path[-1]]) for path in paths]

    radius = healthy.radius.copy()
    implants: list[dict] = []
    sev_lo, sev_hi = cfg.narrowing
    steered_lo = max(sev_lo, 0.35)

    if kind == "serial":
        path = paths[int(np.argmax(outlet_arc))]
        out_arc = float(arc[path[-1]])
        lengths = rng.uniform(cfg.lesion_length[0], min(cfg.lesion_length[1], 1.2), size=3)
        cursor = 0.3
        for k, length in enumerate(lengths):
            # leave room for the remaining lesions plus dodging branch zones
            n_left = lengths.size - 1 - k
            tail = float(lengths[k + 1 :].sum()) + n_left * (cfg.lesion_gap + 0.4)
            hi = out_arc - cfg.outlet_margin - tail - float(length)
            placed = _scan_place(rng, healthy, path, float(length), cursor, hi, path_sets, outlet_arc, implants, cfg)
            if placed is None:
                break
            s, e = placed
            implants.append(_implant(healthy, radius, path, s, e, float(rng.uniform(steered_lo, sev_hi))))
            cursor = e + cfg.lesion_gap
    elif kind == "bifurcation":
        branch_ids = np.flatnonzero(healthy.is_branch)
        valid = [
            int(b)
            for b in branch_ids
            if min(oa for ps, oa in zip(path_sets, outlet_arc) if int(b) in ps) - float(arc[b])
            >= cfg.outlet_margin + 1.0
        ]
        b = int(rng.choice(valid))
        through = [p for p in paths if b in set(int(x) for x in p)]
        path = through[int(rng.integers(0, len(through)))]
        length = float(rng.uniform(cfg.lesion_length[0], min(cfg.lesion_length[1], 1.5)))
        s = float(arc[b]) - length * float(rng.uniform(0.4, 0.6))
        implants.append(_implant(healthy, radius, path, s, s + length, float(rng.uniform(steered_lo, sev_hi))))
    elif kind == "ostial":
        path = paths[int(rng.integers(0, len(paths)))]
        length = float(rng.uniform(cfg.lesion_length[0], 1.2))
        s = float(rng.uniform(0.15, 0.5))
        implants.append(_implant(healthy, radius, path, s, s + length, float(rng.uniform(steered_lo, sev_hi))))
    else:  # focal
        order = list(rng.permutation(len(paths)))
        length = float(rng.uniform(*cfg.lesion_length))
        for trial_len in (length, 0.5):
            for pi in order:
                path = paths[pi]
                placed = _scan_place(
                    rng, healthy, path, trial_len, 1.05, float(arc[path[-1]]), path_sets, outlet_arc, implants, cfg
                )
                if placed is not None:
                    s, e = placed
                    implants.append(_implant(healthy, radius, path, s, e, float(rng.uniform(steered_lo, sev_hi))))
                    break
            if implants:
                break

    n_extra = int(rng.integers(cfg.extra_lesions[0], cfg.extra_lesions[1] + 1))
    if kind == "serial":
        n_extra = min(n_extra, 1)
    for _ in range(n_extra):
        path = paths[int(rng.integers(0, len(paths)))]
        hosted = sum(1 for imp in implants if not imp["_points"].isdisjoint(set(int(p) for p in path)))
        if hosted >= 2:
            continue
        length = float(rng.uniform(cfg.lesion_length[0], 1.5))
        placed = _scan_place(rng, healthy, path, length, 1.05, float(arc[path[-1]]), path_sets, outlet_arc, implants, cfg)
        if placed is not None:
            s, e = placed
            implants.append(_implant(healthy, radius, path, s, e, float(rng.uniform(sev_lo, sev_hi))))

    patient = healthy.with_radii(radius, name=f"synthetic-{seed}")
    detected = detect_lesions(patient, healthy.radius)
    params = {
        "seed": int(seed),
        "kind": kind,
        "depth": depth,
        "healthy_radius": healthy.radius.copy(),
        "aortic_pressure": float(cfg.aortic_pressure),
        "implants": tuple({k: v for k, v in imp.items() if not k.startswith("_")} for imp in implants),
        "lesions": tuple(detected),
    }
    return patient, params


def synthetic_case(seed: int, config: GeneratorConfig | None = None) -> SyntheticCase:
    """Generate one case and close it with Murray-split outlet resistances."""
    cfg = config or GeneratorConfig()
    tree, params = generate_synthetic_patient(seed, cfg)
    healthy_radius = params["healthy_radius"]
    bc = boundary_conditions(tree.with_radii(healthy_radius), cfg)
    return SyntheticCase(
        case_id=f"case-{seed:05d}",
        seed=int(seed),
        tree=tree,
        healthy_radius=healthy_radius,
        bc=bc,
        kind=params["kind"],
        implants=params["implants"],
        lesions=params["lesions"],
    )


def case_stream(seed: int, n_cases: int, config: GeneratorConfig | None = None):
    """Cases for seeds ``seed .. seed+n_cases-1``; kinds cycle for coverage."""
    cfg = config or GeneratorConfig()
    for k in range(n_cases):
        case_cfg = cfg
        if cfg.lesion_kind is None:
            case_cfg = replace(cfg, lesion_kind=LESION_KINDS[k % len(LESION_KINDS)])
        yield synthetic_case(seed + k, case_cfg)


def latency_tree(n_points: int = 5000, spacing: float = 0.05) -> CenterlineTree:
    """Fixed-shape depth-3 tree with exactly ``n_points`` centerline points."""
    n_chains = 15
    per = [(n_points - 1) // n_chains] * n_chains
    for k in range((n_points - 1) % n_chains):
        per[k] += 1
    if min(per) < 2:
        raise ValueError(f"n_points {n_points} too small for a depth-3 tree")

    parent = [-1]
    arc = [0.0]
    radius = [0.22]
    outlet = [False]
    counts = iter(per)

    def chain(tip: int, r_prox: float, level: int) -> None:
        n = next(counts)
        rr = np.linspace(r_prox, r_prox * 0.93, n + 1)[1:]
        for k in range(n):
            parent.append(tip)
            tip = len(parent) - 1
            arc.append(spacing)
            radius.append(float(rr[k]))
            outlet.append(False)
        if level >= 4:
            outlet[tip] = True
            return
        for _ in range(2):
            chain(tip, radius[tip] * 0.76, level + 1)

    chain(0, radius[0], 1)
    return CenterlineTree(
        name=f"latency-{n_points}",
        source="generator",
        parent=np.asarray(parent, dtype=np.int64),
        arc_length=np.asarray(arc, dtype=np.float64),
        radius=np.asarray(radius, dtype=np.float64),
        is_outlet=np.asarray(outlet, dtype=np.bool_),
    )
