"""Lesion detection, classification, and virtual stenting.

Narrowing is measured against the fitted healthy profile, nu = 1 - r/r_ideal.
Contiguous runs of nu >= 0.30 along a root-to-leaf path form lesions; nearby
runs merge across short healthy gaps. Virtual stents pull radii toward the
ideal profile over an arc interval, with a smoothstep ramp at each end so the
modified lumen meets the untouched lumen smoothly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tree import CenterlineTree

NARROWING_THRESHOLD = 0.30
MERGE_GAP = 0.2  # cm of healthy vessel bridged when merging runs
OSTIAL_ZONE = 1.0  # cm of arc length from the root
BLEND_LENGTH = 0.2  # cm of smoothstep ramp at stent ends

KINDS = ("focal", "ostial", "bifurcation", "serial-member")


class PlanError(ValueError):
    """Modification plan rejected."""


@dataclass(frozen=True)
class Lesion:
    path_id: int  # outlet id of the first root-to-leaf path carrying the lesion
    arc_start: float
    arc_end: float
    max_narrowing: float
    kind: str
    member_point_ids: tuple[int, ...]


@dataclass(frozen=True)
class StentInterval:
    path_id: int
    arc_start: float
    arc_end: float
    target_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.target_fraction <= 1.0:
            raise PlanError(f"target fraction {self.target_fraction} outside [0, 1]")
        if self.arc_end < self.arc_start:
            raise PlanError("interval end precedes start")


@dataclass(frozen=True)
class ModificationPlan:
    intervals: tuple[StentInterval, ...]
    blend_length: float = BLEND_LENGTH

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if self.blend_length < 0:
            raise PlanError("negative blend length")


def _ideal_radius_of(ideal) -> np.ndarray:
    if hasattr(ideal, "radius"):
        ideal = ideal.radius
    return np.asarray(ideal, dtype=float)


def narrowing(patient: CenterlineTree, ideal) -> np.ndarray:
    """Pointwise nu = 1 - r/r_ideal, clipped at 0."""
    r_ideal = _ideal_radius_of(ideal)
    return np.maximum(0.0, 1.0 - patient.radius / r_ideal)


def detect_lesions(
    patient: CenterlineTree,
    ideal,
    threshold: float = NARROWING_THRESHOLD,
    merge_gap: float = MERGE_GAP,
    ostial_zone: float = OSTIAL_ZONE,
) -> list[Lesion]:
    """Lesions as merged supra-threshold runs, deduplicated across paths."""
    nu = narrowing(patient, ideal)
    arc = patient.arc_from_root

    per_path: dict[int, list[tuple[int, ...]]] = {}
    seen: dict[frozenset, tuple[int, tuple[int, ...]]] = {}
    for outlet in patient.outlet_ids:
        path = np.asarray(patient.path_points(int(outlet)))
        hot = nu[path] >= threshold
        runs = _runs(hot)
        merged = []
        for lo, hi in runs:
            if merged and arc[path[lo]] - arc[path[merged[-1][1]]] < merge_gap:
                merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        members_list = [tuple(int(p) for p in path[lo : hi + 1]) for lo, hi in merged]
        per_path[int(outlet)] = members_list
        for members in members_list:
            key = frozenset(members)
            if key not in seen:
                seen[key] = (int(outlet), members)

    # a run that another path extends further is not maximal: drop it
    keys = list(seen.keys())
    survivors = [k for k in keys if not any(k < other for other in keys)]
    path_sets = {int(o): set(int(p) for p in patient.path_points(int(o))) for o in patient.outlet_ids}
    touches = {k: [o for o, ps in path_sets.items() if not ps.isdisjoint(k)] for k in survivors}
    counts: dict[int, int] = {o: 0 for o in path_sets}
    for k in survivors:
        for o in touches[k]:
            counts[o] += 1

    lesions = []
    for key in survivors:
        outlet, members = seen[key]
        ids = np.asarray(members)
        serial = any(counts[o] >= 3 for o in touches[key])
        kind = _classify(patient, ids, arc[ids[0]], serial, ostial_zone)
        lesions.append(
            Lesion(
                path_id=outlet,
                arc_start=float(arc[ids[0]]),
                arc_end=float(arc[ids[-1]]),
                max_narrowing=float(nu[ids].max()),
                kind=kind,
                member_point_ids=members,
            )
        )
    lesions.sort(key=lambda l: (l.arc_start, l.path_id))
    return lesions


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [lo, hi] index runs of True."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]


def _classify(tree, member_ids, arc_start, serial, ostial_zone):
    if serial:
        return "serial-member"
    if np.any(tree.is_branch[member_ids]):
        return "bifurcation"
    if arc_start <= ostial_zone:
        return "ostial"
    return "focal"


def classify_lesion(tree: CenterlineTree, lesion: Lesion, path_lesions, ostial_zone: float = OSTIAL_ZONE) -> str:
    """Kind under the precedence serial > bifurcation > ostial > focal."""
    ids = np.asarray(lesion.member_point_ids)
    return _classify(tree, ids, lesion.arc_start, len(path_lesions) >= 3, ostial_zone)


def default_plan(lesion: Lesion, blend_length: float = BLEND_LENGTH) -> ModificationPlan:
    """Full idealization of one lesion, interval padded so the ramps sit
    outside the diseased run and the run itself reaches the full target."""
    return ModificationPlan(
        intervals=(
            StentInterval(
                path_id=lesion.path_id,
                arc_start=max(0.0, lesion.arc_start - blend_length),
                arc_end=lesion.arc_end + blend_length,
                target_fraction=1.0,
            ),
        ),
        blend_length=blend_length,
    )


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def apply_modification(patient: CenterlineTree, ideal, plan: ModificationPlan):
    """Radii pulled toward the ideal profile inside the plan's intervals.

    Returns the modified tree and the ids of edges whose geometry changed at
    either endpoint.
    """
    r_ideal = _ideal_radius_of(ideal)
    if r_ideal.shape != patient.radius.shape:
        raise PlanError("ideal profile does not match the tree")
    arc = patient.arc_from_root

    fraction = np.zeros(patient.n_points)
    target_of = np.full(patient.n_points, np.nan)
    for iv in plan.intervals:
        path = np.asarray(patient.path_points(int(iv.path_id)))
        on = (arc[path] >= iv.arc_start - 1e-12) & (arc[path] <= iv.arc_end + 1e-12)
        pts = path[on]
        if pts.size == 0:
            continue
        if plan.blend_length > 0:
            up = _smoothstep((arc[pts] - iv.arc_start) / plan.blend_length)
            down = _smoothstep((iv.arc_end - arc[pts]) / plan.blend_length)
            f = iv.target_fraction * np.minimum(up, down)
        else:
            f = np.full(pts.size, iv.target_fraction)
        active = pts[f > 0]
        conflict = ~np.isnan(target_of[active]) & (target_of[active] != iv.target_fraction)
        if conflict.any():
            raise PlanError(
                f"overlapping intervals with conflicting fractions at points {active[conflict].tolist()[:8]}"
            )
        target_of[active] = iv.target_fraction
        fraction[pts] = np.maximum(fraction[pts], f)

    radius = patient.radius + fraction * (r_ideal - patient.radius)
    changed = radius != patient.radius
    edge_changed = changed.copy()
    edge_changed[1:] |= changed[patient.parent[1:]]
    edge_changed[0] = False
    modified_edges = np.flatnonzero(edge_changed)
    if modified_edges.size == 0:
        return patient, modified_edges
    return patient.with_radii(radius), modified_edges


def select_evaluation_points(
    tree: CenterlineTree,
    modified_edges,
    zone_length: float = 2.0,
    branch_clearance: float = 0.3,
) -> list[int]:
    """First admissible probe point past the treated region on each path.

    Admissible: strictly beyond the recovery window after the last modified
    edge, clear of every bifurcation on the path, and not the outlet itself.
    """
    modified = {int(e) for e in np.asarray(modified_edges).ravel()}
    if not modified:
        return []
    arc = tree.arc_from_root
    chosen = set()
    for outlet in tree.outlet_ids:
        path = np.asarray(tree.path_points(int(outlet)))
        on_path = [p for p in path[1:] if int(p) in modified]
        if not on_path:
            continue
        limit = arc[on_path[-1]] + zone_length
        branch_arcs = arc[path[tree.is_branch[path]]]
        for p in path:
            if arc[p] <= limit or p == outlet:
                continue
            if branch_arcs.size and np.min(np.abs(branch_arcs - arc[p])) < branch_clearance:
                continue
            chosen.add(int(p))
            break
    return sorted(chosen)


def lesion_report(lesions) -> str:
    """Tabular text: one lesion per row."""
    lines = ["path_id,arc_start,arc_end,max_narrowing,kind,n_points"]
    for l in lesions:
        lines.append(
            f"{l.path_id},{l.arc_start!r},{l.arc_end!r},{l.max_narrowing!r},{l.kind},{len(l.member_point_ids)}"
        )
    return "\n".join(lines) + "\n"


def with_kind(lesion: Lesion, kind: str) -> Lesion:
    return replace(lesion, kind=kind)
