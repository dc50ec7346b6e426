"""Patient-specific response surface anchored to four reference solutions.

The build fits one affine resistance law per edge and per geometry (patient
and fully idealized) from the hyperemic and stressed reference solutions, so
the surface reproduces all four anchors exactly. Queries for an intermediate
geometry interpolate each edge's coefficients between the two fits:

* ``a`` follows the Poiseuille-consistent blend ``alpha(r) = a0/r^4 + a1``
  in the edge's mean radius, which is exact whenever both endpoint values
  obey ``a ~ 1/r^4``.
* ``b`` is blended linearly in the geometric gradient ``g = (dA/dz)/A^3``.

Downstream of any modified edge, narrowing segments inside a fixed-length
recovery window are replaced with plain Poiseuille losses: interpolating a
post-stenotic recovery coefficient into a geometry whose jet is gone would
invent pressure gains that no longer exist.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from . import _kernels
from .oracle import (
    KAPPA,
    AnchorSet,
    BoundaryConditionSet,
    HemodynamicSolution,
    bc_document,
    bc_from_document,
)
from .tree import CenterlineTree, SegmentGeometry

#: Superemic-to-hyperemic flow separation below which an edge fit is
#: ill-conditioned and analytic coefficients are used instead.
TOL1 = 0.1

#: Arc length of the pressure-recovery window distal to modified edges (cm).
RECOVERY_ZONE_LENGTH = 2.0

#: Relative radius gap under which patient and ideal coincide for an edge.
DEGENERATE_RADIUS_GAP = 1e-6

#: Absolute gradient gap under which the b-blend falls back to the a-blend.
DEGENERATE_GRADIENT_GAP = 1e-10

Source = Literal["fitted", "poiseuille_fallback", "recovery_poiseuille"]


class SurfaceBuildError(ValueError):
    """Anchors unusable for a surface build."""


class EnvelopeError(ValueError):
    """Query geometry outside the patient-to-ideal envelope."""


@dataclass(frozen=True)
class EdgeCoefficients:
    a: float
    b: float
    source: Source


# -- interpolants ---------------------------------------------------------------


def alpha_coefficients(r_orig: float, r_ideal: float) -> tuple[float, float]:
    """(a0, a1) of alpha(r) = a0/r^4 + a1 with alpha(r_orig)=1, alpha(r_ideal)=0."""
    d = r_ideal**4 - r_orig**4
    return r_ideal**4 * r_orig**4 / d, -(r_orig**4) / d


def alpha(r, r_orig, r_ideal):
    """Radius blend weight on the patient-side coefficient."""
    a0, a1 = alpha_coefficients(r_orig, r_ideal)
    return a0 / np.asarray(r, dtype=float) ** 4 + a1


def beta(g, g_orig, g_ideal):
    """Gradient blend weight on the patient-side coefficient."""
    return (np.asarray(g, dtype=float) - g_ideal) / (g_orig - g_ideal)


def beta_printed_coefficients(
    area_orig: float, darea_orig: float, area_ideal: float, darea_ideal: float
) -> tuple[float, float]:
    """(b0, b1) of the expanded form beta = b0*g + b1.

    Algebraically identical to :func:`beta` with g = dA / A^3 wherever
    ``darea_ideal`` is nonzero; kept separate so the identity can be checked.
    """
    g_orig = darea_orig / area_orig**3
    g_ideal = darea_ideal / area_ideal**3
    b0 = 1.0 / (g_orig - g_ideal)
    b1 = 1.0 / (1.0 - (area_ideal / area_orig) ** 3 * (darea_orig / darea_ideal))
    return b0, b1


# -- per-edge geometry ------------------------------------------------------------


def _edge_geometry(tree: CenterlineTree):
    """Vector per-edge mean radius, mean-area gradient ratio g, and dA/dz."""
    rp = tree.radius[tree.parent]
    rd = tree.radius
    rm = 0.5 * (rp + rd)
    ap = math.pi * rp**2
    ad = math.pi * rd**2
    am = 0.5 * (ap + ad)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = (ad - ap) / tree.arc_length
        g = grad / am**3
    grad[0] = 0.0
    g[0] = 0.0
    return rm, g, grad


def _poiseuille_a(tree: CenterlineTree, viscosity: float) -> np.ndarray:
    rm = 0.5 * (tree.radius[tree.parent] + tree.radius)
    with np.errstate(divide="ignore"):
        a = 8.0 * viscosity * tree.arc_length / (math.pi * rm**4)
    a[0] = 0.0
    return a


def _fallback_b(tree: CenterlineTree, density: float, kappa: float) -> np.ndarray:
    ap = math.pi * tree.radius[tree.parent] ** 2
    ad = math.pi * tree.radius**2
    b = 0.5 * density * (1.0 / ad**2 - 1.0 / ap**2)
    b[0] = 0.0
    # expansions recover only a kappa fraction of the Bernoulli head; dropping
    # the negative branch entirely would discard most of a severe lesion's
    # post-throat recovery exactly where the fallback triggers (flow-limited
    # branches), overstating the loss several-fold
    return np.where(b < 0.0, kappa * b, b)


# -- coefficient fit ---------------------------------------------------------------


def fit_edge_coefficients(
    dp_hyper: float,
    q_hyper: float,
    dp_super: float,
    q_super: float,
    seg: SegmentGeometry,
    viscosity: float,
    density: float,
    tol1: float = TOL1,
    kappa: float = KAPPA,
) -> EdgeCoefficients:
    """Two-state fit of dP = (a + b*Q)*Q for one edge.

    The two anchor states give two (resistance, flow) samples; when the flows
    are separated enough the 2x2 system is solved exactly, otherwise the fit
    is abandoned for analytic Poiseuille/Bernoulli values (expansions recover
    a ``kappa`` fraction of the Bernoulli head).
    """
    if q_hyper <= 0 or q_super <= 0:
        raise SurfaceBuildError(
            f"non-positive anchor flow on edge {seg.distal_id}: {q_hyper}, {q_super}"
        )
    if q_super - q_hyper > tol1 * q_hyper:
        r_h = dp_hyper / q_hyper
        r_s = dp_super / q_super
        b = (r_s - r_h) / (q_super - q_hyper)
        a = r_h - b * q_hyper
        return EdgeCoefficients(a=a, b=b, source="fitted")
    a = 8.0 * viscosity * seg.length / (math.pi * seg.mean_radius**4)
    b = 0.5 * density * (1.0 / seg.area_distal**2 - 1.0 / seg.area_proximal**2)
    if b < 0.0:
        b *= kappa
    return EdgeCoefficients(a=a, b=b, source="poiseuille_fallback")


def _fit_arrays(
    tree: CenterlineTree,
    hyper: HemodynamicSolution,
    super_: HemodynamicSolution,
    viscosity: float,
    density: float,
    tol1: float,
    kappa: float,
):
    """Vectorized two-state fit across all edges of one geometry."""
    q_h = hyper.flows
    q_s = super_.flows
    bad = np.flatnonzero((q_h[1:] <= 0) | (q_s[1:] <= 0)) + 1
    if bad.size:
        raise SurfaceBuildError(f"non-positive anchor flow on edges {bad.tolist()[:8]}")
    dp_h = hyper.pressures[tree.parent] - hyper.pressures
    dp_s = super_.pressures[tree.parent] - super_.pressures
    with np.errstate(divide="ignore", invalid="ignore"):
        r_h = dp_h / q_h
        r_s = dp_s / q_s
        b_fit = (r_s - r_h) / (q_s - q_h)
        a_fit = r_h - b_fit * q_h
    fitted = (q_s - q_h) > tol1 * q_h
    a = np.where(fitted, a_fit, _poiseuille_a(tree, viscosity))
    b = np.where(fitted, b_fit, _fallback_b(tree, density, kappa))
    a[0] = 0.0
    b[0] = 0.0
    return a, b, fitted


# -- recovery zone ------------------------------------------------------------------


def recovery_zone_edges(
    tree: CenterlineTree,
    modified_edges,
    zone_length: float = RECOVERY_ZONE_LENGTH,
) -> np.ndarray:
    """Unmodified edges whose proximal point lies within ``zone_length`` arc
    length distal of some modified edge. Propagates through bifurcations."""
    n = tree.n_points
    modified = np.zeros(n, dtype=bool)
    idx = np.asarray(sorted(int(e) for e in modified_edges), dtype=np.int64)
    if idx.size == 0:
        return np.zeros(n, dtype=bool)
    if idx.min() < 1 or idx.max() >= n:
        raise ValueError(f"modified edge ids out of range: {idx.tolist()[:8]}")
    modified[idx] = True

    dist = np.full(n, np.inf)
    dist[modified] = 0.0  # a modified edge's distal point is its child id
    for i in range(1, n):
        through = dist[tree.parent[i]] + tree.arc_length[i]
        if through < dist[i]:
            dist[i] = through
    zone = np.zeros(n, dtype=bool)
    zone[1:] = ~modified[1:] & (dist[tree.parent[1:]] <= zone_length)
    return zone


# -- the surface --------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryCoefficients:
    """Per-edge laws for one queried geometry."""

    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    recovery_zone: np.ndarray  # bool mask over edges
    source: list[str]


@dataclass(frozen=True)
class ResponseSurface:
    patient_tree: CenterlineTree
    ideal_tree: CenterlineTree
    bc_hyperemia: BoundaryConditionSet
    bc_superemia: BoundaryConditionSet
    patient_a: np.ndarray
    patient_b: np.ndarray
    patient_fitted: np.ndarray
    ideal_a: np.ndarray
    ideal_b: np.ndarray
    ideal_fitted: np.ndarray
    gamma: np.ndarray
    anchor_flows: np.ndarray  # patient-hyperemia edge flows (warm start)
    anchor_pressures: np.ndarray  # patient-hyperemia point pressures (BC scaling)
    anchors: AnchorSet | None = None

    @property
    def n_points(self) -> int:
        return self.patient_tree.n_points

    @cached_property
    def _patient_geom(self):
        return _edge_geometry(self.patient_tree)

    @cached_property
    def _ideal_geom(self):
        return _edge_geometry(self.ideal_tree)

    def source_of(self, edge_id: int, which: str = "patient") -> Source:
        fitted = self.patient_fitted if which == "patient" else self.ideal_fitted
        return "fitted" if fitted[edge_id] else "poiseuille_fallback"

    def coefficients_for_geometry(
        self,
        modified_tree: CenterlineTree | None = None,
        modified_edges=(),
        zone_length: float = RECOVERY_ZONE_LENGTH,
    ) -> GeometryCoefficients:
        """Interpolated per-edge laws for a geometry inside the envelope."""
        tree = self.patient_tree if modified_tree is None else modified_tree
        if tree.n_points != self.n_points or not np.array_equal(tree.parent, self.patient_tree.parent):
            raise EnvelopeError("query tree topology differs from the surface's tree")
        lo = np.minimum(self.patient_tree.radius, self.ideal_tree.radius) - 1e-9
        hi = np.maximum(self.patient_tree.radius, self.ideal_tree.radius) + 1e-9
        outside = np.flatnonzero((tree.radius < lo) | (tree.radius > hi))
        if outside.size:
            raise EnvelopeError(f"radii outside the patient-ideal envelope at points {outside.tolist()[:8]}")

        rm_p, g_p, _ = self._patient_geom
        rm_i, g_i, _ = self._ideal_geom
        rm_q, g_q, grad_q = _edge_geometry(tree)

        n = self.n_points
        degenerate_r = np.abs(rm_i - rm_p) <= DEGENERATE_RADIUS_GAP * np.maximum(rm_i, rm_p)
        with np.errstate(divide="ignore", invalid="ignore"):
            al = np.where(degenerate_r, 1.0, _alpha_vec(rm_q, rm_p, rm_i))
        degenerate_g = np.abs(g_p - g_i) <= DEGENERATE_GRADIENT_GAP
        with np.errstate(divide="ignore", invalid="ignore"):
            be = np.where(degenerate_g, al, (g_q - g_i) / (g_p - g_i))

        a = al * self.patient_a + (1.0 - al) * self.ideal_a
        b = be * self.patient_b + (1.0 - be) * self.ideal_b

        zone = recovery_zone_edges(tree, modified_edges, zone_length)
        replace = zone & (grad_q < 0.0)
        a = np.where(replace, _poiseuille_a(tree, self.bc_hyperemia.viscosity), a)
        b = np.where(replace, 0.0, b)
        a[0] = 0.0
        b[0] = 0.0
        al[0] = 1.0
        be[0] = 1.0

        source = []
        for e in range(n):
            if replace[e]:
                source.append("recovery_poiseuille")
            elif al[e] >= 0.5:
                source.append("fitted" if self.patient_fitted[e] else "poiseuille_fallback")
            else:
                source.append("fitted" if self.ideal_fitted[e] else "poiseuille_fallback")
        return GeometryCoefficients(a=a, b=b, alpha=al, beta=be, recovery_zone=replace, source=source)

    # -- serialization ----------------------------------------------------------

    def to_document(self) -> dict:
        def sol_doc(s: HemodynamicSolution) -> dict:
            return {
                "pressures": s.pressures.tolist(),
                "flows": [None] + s.flows[1:].tolist(),
                "ostial_flow": s.ostial_flow,
                "converged": s.converged,
                "iterations": s.iterations,
            }

        doc = {
            "format_version": 1,
            "kind": "response_surface",
            "patient_tree": self.patient_tree.to_document(),
            "ideal_radius": self.ideal_tree.radius.tolist(),
            "bc_hyperemia": bc_document(self.bc_hyperemia),
            "bc_superemia": bc_document(self.bc_superemia),
            "patient_a": self.patient_a.tolist(),
            "patient_b": self.patient_b.tolist(),
            "patient_fitted": self.patient_fitted.astype(int).tolist(),
            "ideal_a": self.ideal_a.tolist(),
            "ideal_b": self.ideal_b.tolist(),
            "ideal_fitted": self.ideal_fitted.astype(int).tolist(),
            "gamma": self.gamma.tolist(),
            "anchor_flows": [None] + self.anchor_flows[1:].tolist(),
            "anchor_pressures": self.anchor_pressures.tolist(),
        }
        if self.anchors is not None:
            doc["anchor_solutions"] = {
                "patient_hyper": sol_doc(self.anchors.patient_hyper),
                "patient_super": sol_doc(self.anchors.patient_super),
                "ideal_hyper": sol_doc(self.anchors.ideal_hyper),
                "ideal_super": sol_doc(self.anchors.ideal_super),
                "kappa": self.anchors.kappa,
            }
        return doc

    @staticmethod
    def from_document(doc: dict) -> "ResponseSurface":
        if doc.get("kind") != "response_surface":
            raise SurfaceBuildError("not a response surface document")
        patient = CenterlineTree.from_document(doc["patient_tree"])
        ideal = patient.with_radii(np.asarray(doc["ideal_radius"], dtype=float))

        def flows_from(vals) -> np.ndarray:
            return np.asarray([np.nan if v is None else v for v in vals], dtype=float)

        bc_h = bc_from_document(doc["bc_hyperemia"])
        bc_s = bc_from_document(doc["bc_superemia"])
        anchors = None
        if "anchor_solutions" in doc:
            raw = doc["anchor_solutions"]

            def sol_from(d: dict) -> HemodynamicSolution:
                pressures = np.asarray(d["pressures"], dtype=float)
                return HemodynamicSolution(
                    pressures=pressures,
                    flows=flows_from(d["flows"]),
                    ffr=pressures / bc_h.aortic_pressure,
                    ostial_flow=float(d["ostial_flow"]),
                    converged=bool(d["converged"]),
                    iterations=int(d["iterations"]),
                )

            anchors = AnchorSet(
                patient_tree=patient,
                ideal_tree=ideal,
                bc_hyperemia=bc_h,
                bc_superemia=bc_s,
                patient_hyper=sol_from(raw["patient_hyper"]),
                patient_super=sol_from(raw["patient_super"]),
                ideal_hyper=sol_from(raw["ideal_hyper"]),
                ideal_super=sol_from(raw["ideal_super"]),
                kappa=float(raw.get("kappa", 0.7)),
            )
        return ResponseSurface(
            patient_tree=patient,
            ideal_tree=ideal,
            bc_hyperemia=bc_h,
            bc_superemia=bc_s,
            patient_a=np.asarray(doc["patient_a"], dtype=float),
            patient_b=np.asarray(doc["patient_b"], dtype=float),
            patient_fitted=np.asarray(doc["patient_fitted"], dtype=bool),
            ideal_a=np.asarray(doc["ideal_a"], dtype=float),
            ideal_b=np.asarray(doc["ideal_b"], dtype=float),
            ideal_fitted=np.asarray(doc["ideal_fitted"], dtype=bool),
            gamma=np.asarray(doc["gamma"], dtype=float),
            anchor_flows=flows_from(doc["anchor_flows"]),
            anchor_pressures=np.asarray(doc["anchor_pressures"], dtype=float),
            anchors=anchors,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_document())

    @staticmethod
    def loads(text: str) -> "ResponseSurface":
        return ResponseSurface.from_document(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @staticmethod
    def load(path) -> "ResponseSurface":
        with open(path, encoding="utf-8") as fh:
            return ResponseSurface.loads(fh.read())


def _alpha_vec(r, r_orig, r_ideal):
    d = r_ideal**4 - r_orig**4
    a0 = r_ideal**4 * r_orig**4 / d
    a1 = -(r_orig**4) / d
    return a0 / r**4 + a1


def extract_gamma(
    tree: CenterlineTree,
    patient_a: np.ndarray,
    patient_b: np.ndarray,
    hyper: HemodynamicSolution,
    outlet_r: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    """Per-daughter-edge split corrections from the hyperemic anchor.

    gamma is whatever factor makes the effective-resistance split law land
    exactly on the anchor's daughter flows, so replaying the anchor state
    through the predictor reproduces every edge flow.
    """
    r_edge = patient_a + patient_b * np.where(np.isnan(hyper.flows), 0.0, hyper.flows)
    r_edge[0] = 0.0
    r_eff, r_down = _kernels.downstream_resistance(tree, r_edge, outlet_r, backend=backend)
    gamma = np.ones(tree.n_points)
    for m in np.flatnonzero(tree.is_branch):
        q_m = hyper.flows[m] if m else hyper.ostial_flow
        if not q_m > 0:
            raise SurfaceBuildError(f"non-positive anchor flow into branch point {m}")
        for d in tree.children_of(m):
            ideal_split = q_m * r_eff[m] / r_down[d]
            if not np.isfinite(ideal_split) or ideal_split <= 0:
                raise SurfaceBuildError(f"degenerate split at branch point {m}, daughter {d}")
            gamma[d] = hyper.flows[d] / ideal_split
    return gamma


def build_surface(anchors: AnchorSet, tol1: float = TOL1, backend: str | None = None) -> ResponseSurface:
    """Fit both geometries' edge laws and the split corrections from anchors."""
    if not anchors.all_converged():
        bad = [
            name
            for name, s in (
                ("patient_hyper", anchors.patient_hyper),
                ("patient_super", anchors.patient_super),
                ("ideal_hyper", anchors.ideal_hyper),
                ("ideal_super", anchors.ideal_super),
            )
            if not s.converged
        ]
        raise SurfaceBuildError(f"anchor solves did not converge: {bad}")
    bc = anchors.bc_hyperemia
    pa, pb, pf = _fit_arrays(
        anchors.patient_tree, anchors.patient_hyper, anchors.patient_super,
        bc.viscosity, bc.density, tol1, anchors.kappa,
    )
    ia, ib, if_ = _fit_arrays(
        anchors.ideal_tree, anchors.ideal_hyper, anchors.ideal_super,
        bc.viscosity, bc.density, tol1, anchors.kappa,
    )
    gamma = extract_gamma(
        anchors.patient_tree, pa, pb, anchors.patient_hyper,
        bc.resistance_array(anchors.patient_tree), backend=backend,
    )
    return ResponseSurface(
        patient_tree=anchors.patient_tree,
        ideal_tree=anchors.ideal_tree,
        bc_hyperemia=bc,
        bc_superemia=anchors.bc_superemia,
        patient_a=pa,
        patient_b=pb,
        patient_fitted=pf,
        ideal_a=ia,
        ideal_b=ib,
        ideal_fitted=if_,
        gamma=gamma,
        anchor_flows=anchors.patient_hyper.flows.copy(),
        anchor_pressures=anchors.patient_hyper.pressures.copy(),
        anchors=anchors,
    )
