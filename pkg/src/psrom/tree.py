"""Centerline tree data model, validation, and text serialization.

A coronary tree is a rooted tree of centerline points. Point ids are dense
``0..n-1`` and topologically ordered (every parent id is smaller than its
child ids), so id 0 is always the ostium. Each non-root point defines the
edge from its parent; interior points have one or two children (only
bifurcations are representable) and every leaf is an outlet. All quantities
are CGS: centimeters, dyn/cm^2, cm^3/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

FORMAT_VERSION = 1
UNIT_SYSTEM = "CGS"

#: dyn/cm^2 per mmHg, used wherever pressures are quoted in clinical units.
MMHG = 1333.22


class TreeValidationError(ValueError):
    """A centerline document violates the structural contract."""


@dataclass(frozen=True)
class CenterlinePoint:
    """One centerline sample: lumen radius at an arc position on the tree."""

    id: int
    parent: int | None
    arc_length_from_parent: float
    radius: float
    is_outlet: bool


@dataclass(frozen=True)
class SegmentGeometry:
    """Geometry of one edge, proximal (parent) to distal (child)."""

    proximal_id: int
    distal_id: int
    length: float
    radius_proximal: float
    radius_distal: float

    @property
    def mean_radius(self) -> float:
        return 0.5 * (self.radius_proximal + self.radius_distal)

    @property
    def area_proximal(self) -> float:
        return math.pi * self.radius_proximal**2

    @property
    def area_distal(self) -> float:
        return math.pi * self.radius_distal**2

    @property
    def area_gradient(self) -> float:
        """dA/dz in the proximal-to-distal direction; negative = narrowing."""
        return (self.area_distal - self.area_proximal) / self.length


@dataclass(frozen=True)
class CenterlineTree:
    """Immutable centerline tree backed by flat per-point arrays.

    ``parent[i]`` is -1 at the root; ``arc_length[i]`` is the arc length of
    the edge from ``parent[i]`` to ``i`` (0 at the root). Arrays are
    read-only; use :meth:`with_radii` to derive a modified tree.
    """

    name: str
    source: str
    parent: np.ndarray
    arc_length: np.ndarray
    radius: np.ndarray
    is_outlet: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "parent", _frozen(self.parent, np.int64))
        object.__setattr__(self, "arc_length", _frozen(self.arc_length, np.float64))
        object.__setattr__(self, "radius", _frozen(self.radius, np.float64))
        object.__setattr__(self, "is_outlet", _frozen(self.is_outlet, np.bool_))
        _validate_arrays(self.parent, self.arc_length, self.radius, self.is_outlet)

    # -- basic shape ---------------------------------------------------------

    @property
    def n_points(self) -> int:
        return int(self.parent.shape[0])

    @property
    def root(self) -> int:
        return 0

    @cached_property
    def n_children(self) -> np.ndarray:
        counts = np.zeros(self.n_points, dtype=np.int64)
        np.add.at(counts, self.parent[1:], 1)
        return _frozen(counts, np.int64)

    @cached_property
    def is_branch(self) -> np.ndarray:
        return _frozen(self.n_children == 2, np.bool_)

    @cached_property
    def children(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR child lists: (start offsets per point, concatenated child ids)."""
        order = np.argsort(self.parent[1:], kind="stable") + 1
        starts = np.zeros(self.n_points + 1, dtype=np.int64)
        np.cumsum(self.n_children, out=starts[1:])
        return _frozen(starts, np.int64), _frozen(order.astype(np.int64), np.int64)

    def children_of(self, point_id: int) -> np.ndarray:
        starts, flat = self.children
        return flat[starts[point_id] : starts[point_id + 1]]

    @cached_property
    def outlet_ids(self) -> np.ndarray:
        return _frozen(np.flatnonzero(self.is_outlet), np.int64)

    @cached_property
    def arc_from_root(self) -> np.ndarray:
        """Cumulative arc length from the ostium to each point."""
        arc = np.zeros(self.n_points)
        for i in range(1, self.n_points):
            arc[i] = arc[self.parent[i]] + self.arc_length[i]
        return _frozen(arc, np.float64)

    @cached_property
    def chains(self) -> list[np.ndarray]:
        """Maximal series runs of edges (child ids, proximal to distal).

        A new chain starts at every edge whose proximal point is the root or
        a bifurcation. Chains cover all edges exactly once and are the unit
        of vectorization for the numpy sweep path.
        """
        branch = self.is_branch
        runs: list[np.ndarray] = []
        starts = [c for c in range(1, self.n_points) if self.parent[c] == 0 or branch[self.parent[c]]]
        for head in sorted(starts):
            run = [head]
            tip = head
            while not self.is_outlet[tip] and not branch[tip]:
                tip = int(self.children_of(tip)[0])
                run.append(tip)
            runs.append(np.asarray(run, dtype=np.int64))
        return runs

    # -- queries ---------------------------------------------------------------

    def segment(self, child_id: int) -> SegmentGeometry:
        """Geometry of the edge ending at ``child_id``."""
        if child_id <= 0 or child_id >= self.n_points:
            raise IndexError(f"no edge ends at point {child_id}")
        p = int(self.parent[child_id])
        return SegmentGeometry(
            proximal_id=p,
            distal_id=child_id,
            length=float(self.arc_length[child_id]),
            radius_proximal=float(self.radius[p]),
            radius_distal=float(self.radius[child_id]),
        )

    def path_to_root(self, point_id: int) -> np.ndarray:
        """Point ids from ``point_id`` up to the root, inclusive."""
        out = [point_id]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return np.asarray(out, dtype=np.int64)

    def path_points(self, outlet_id: int) -> np.ndarray:
        """Root-to-outlet point ids for the path named by its outlet."""
        if not self.is_outlet[outlet_id]:
            raise TreeValidationError(f"point {outlet_id} is not an outlet")
        return self.path_to_root(outlet_id)[::-1].copy()

    def paths(self) -> list[np.ndarray]:
        """All root-to-leaf paths, ordered by outlet id."""
        return [self.path_points(int(k)) for k in self.outlet_ids]

    def is_distal(self, point_id: int, other_id: int) -> bool:
        """True when ``other_id`` lies strictly proximal on the root path of ``point_id``."""
        if point_id == other_id:
            return False
        i = point_id
        while i >= 0:
            i = int(self.parent[i])
            if i == other_id:
                return True
        return False

    def points(self) -> list[CenterlinePoint]:
        return [
            CenterlinePoint(
                id=i,
                parent=None if self.parent[i] < 0 else int(self.parent[i]),
                arc_length_from_parent=float(self.arc_length[i]),
                radius=float(self.radius[i]),
                is_outlet=bool(self.is_outlet[i]),
            )
            for i in range(self.n_points)
        ]

    def with_radii(self, radius: np.ndarray, name: str | None = None) -> "CenterlineTree":
        """Same topology with a replaced radius profile."""
        radius = np.asarray(radius, dtype=np.float64)
        if radius.shape != self.radius.shape:
            raise TreeValidationError("radius array shape mismatch")
        return CenterlineTree(
            name=self.name if name is None else name,
            source=self.source,
            parent=self.parent,
            arc_length=self.arc_length,
            radius=radius,
            is_outlet=self.is_outlet,
        )

    # -- construction / serialization ------------------------------------------

    @staticmethod
    def from_points(
        points: list[CenterlinePoint], name: str = "", source: str = ""
    ) -> "CenterlineTree":
        n = len(points)
        ids = sorted(p.id for p in points)
        if ids != list(range(n)):
            raise TreeValidationError(f"point ids are not dense 0..{n - 1}: {ids[:8]}...")
        by_id = sorted(points, key=lambda p: p.id)
        parent = np.asarray([-1 if p.parent is None else p.parent for p in by_id], dtype=np.int64)
        arc = np.asarray([p.arc_length_from_parent for p in by_id], dtype=np.float64)
        radius = np.asarray([p.radius for p in by_id], dtype=np.float64)
        outlet = np.asarray([p.is_outlet for p in by_id], dtype=np.bool_)
        return CenterlineTree(name=name, source=source, parent=parent, arc_length=arc, radius=radius, is_outlet=outlet)

    def to_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "source": self.source,
            "units": UNIT_SYSTEM,
            "points": [
                {
                    "id": i,
                    "parent": None if self.parent[i] < 0 else int(self.parent[i]),
                    "arc_length_from_parent": float(self.arc_length[i]),
                    "radius": float(self.radius[i]),
                    "is_outlet": bool(self.is_outlet[i]),
                }
                for i in range(self.n_points)
            ],
        }

    @staticmethod
    def from_document(doc: dict) -> "CenterlineTree":
        if not isinstance(doc, dict) or "points" not in doc:
            raise TreeValidationError("document has no 'points' array")
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise TreeValidationError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
        pts = []
        for raw in doc["points"]:
            try:
                pts.append(
                    CenterlinePoint(
                        id=int(raw["id"]),
                        parent=None if raw["parent"] is None else int(raw["parent"]),
                        arc_length_from_parent=float(raw["arc_length_from_parent"]),
                        radius=float(raw["radius"]),
                        is_outlet=bool(raw["is_outlet"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TreeValidationError(f"malformed point record {raw!r}: {exc}") from exc
        return CenterlineTree.from_points(
            pts, name=str(doc.get("name", "")), source=str(doc.get("source", ""))
        )

    def dumps(self) -> str:
        """JSON text. Floats use shortest round-trip decimals, so load(dumps(t))
        reproduces every radius and arc length bit for bit."""
        return json.dumps(self.to_document(), indent=1)

    @staticmethod
    def loads(text: str) -> "CenterlineTree":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TreeValidationError(f"not valid JSON: {exc}") from exc
        return CenterlineTree.from_document(doc)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @staticmethod
    def load(path) -> "CenterlineTree":
        with open(path, encoding="utf-8") as fh:
            return CenterlineTree.loads(fh.read())


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _validate_arrays(parent: np.ndarray, arc: np.ndarray, radius: np.ndarray, outlet: np.ndarray) -> None:
    n = parent.shape[0]
    if n < 2:
        raise TreeValidationError("tree needs at least an ostium and one outlet")
    if not (arc.shape[0] == radius.shape[0] == outlet.shape[0] == n):
        raise TreeValidationError("per-point arrays disagree in length")

    roots = np.flatnonzero(parent < 0)
    if roots.size != 1 or roots[0] != 0:
        raise TreeValidationError(f"expected exactly point 0 as root, got roots {roots.tolist()}")
    bad_order = np.flatnonzero(parent[1:] >= np.arange(1, n)) + 1
    if bad_order.size:
        i = int(bad_order[0])
        raise TreeValidationError(
            f"topological order violated (cycle or forward parent) at point {i}: parent {int(parent[i])}"
        )

    bad_r = np.flatnonzero(~(radius > 0) | ~np.isfinite(radius))
    if bad_r.size:
        raise TreeValidationError(f"non-positive radius at points {bad_r.tolist()[:8]}")
    bad_arc = np.flatnonzero(~(arc[1:] > 0) | ~np.isfinite(arc[1:])) + 1
    if bad_arc.size:
        raise TreeValidationError(f"non-positive edge length at points {bad_arc.tolist()[:8]}")

    counts = np.zeros(n, dtype=np.int64)
    np.add.at(counts, parent[1:], 1)
    over = np.flatnonzero(counts > 2)
    if over.size:
        raise TreeValidationError(f"more than two children (trifurcation) at points {over.tolist()[:8]}")
    leaves = counts == 0
    unmarked = np.flatnonzero(leaves & ~outlet)
    if unmarked.size:
        raise TreeValidationError(f"leaf points not marked as outlets: {unmarked.tolist()[:8]}")
    interior_outlets = np.flatnonzero(~leaves & outlet)
    if interior_outlets.size:
        raise TreeValidationError(f"interior points marked as outlets: {interior_outlets.tolist()[:8]}")
    if counts[0] != 1:
        raise TreeValidationError(f"ostium must have exactly one child edge, has {int(counts[0])}")
