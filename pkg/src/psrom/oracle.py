"""Steady nonlinear resistance-network solver used as ground truth.

Every edge carries an affine resistance law: the pressure drop over a segment
is ``a*Q + b*Q^2`` with a Poiseuille ``a`` from the mean radius and a Bernoulli
``b`` from the end areas. Narrowing segments lose the full Bernoulli term;
widening segments recover a fraction ``kappa`` of it (so ``b`` is negative
there and pressure can locally rise, as it does distal to a real stenosis).

The network is closed by a fixed aortic inlet pressure and one resistance per
outlet (``P = R*Q`` to venous zero). The solve is a damped fixed point:
linearize every edge at the current flows, reduce the tree series/parallel,
redistribute flows, repeat. The reported solution is the final exact linear
solve, so conservation and the outlet law hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .tree import CenterlineTree, SegmentGeometry, MMHG

#: Default blood properties (CGS: poise, g/cm^3) and inlet pressure (dyn/cm^2).
VISCOSITY = 0.04
DENSITY = 1.06
AORTIC_PRESSURE = 100.0 * MMHG

#: Fraction of the Bernoulli term recovered across widening segments.
KAPPA = 0.7

#: Outlet resistance multiplier for the stressed ("superemic") flow state.
SUPEREMIA_FACTOR = 0.6


class BoundaryConditionError(ValueError):
    """Boundary conditions do not close the given tree."""


@dataclass(frozen=True)
class BoundaryConditionSet:
    """Inlet pressure plus one proximal resistance per outlet point."""

    aortic_pressure: float = AORTIC_PRESSURE
    outlet_resistance: dict[int, float] = field(default_factory=dict)
    viscosity: float = VISCOSITY
    density: float = DENSITY

    def validate(self, tree: CenterlineTree) -> None:
        if not self.aortic_pressure > 0:
            raise BoundaryConditionError(f"aortic pressure must be positive, got {self.aortic_pressure}")
        if not (self.viscosity > 0 and self.density > 0):
            raise BoundaryConditionError("viscosity and density must be positive")
        outlets = set(int(k) for k in tree.outlet_ids)
        given = set(self.outlet_resistance)
        if given != outlets:
            missing = sorted(outlets - given)
            extra = sorted(given - outlets)
            raise BoundaryConditionError(f"outlet resistances mismatch: missing {missing}, extra {extra}")
        bad = sorted(k for k, r in self.outlet_resistance.items() if not r > 0)
        if bad:
            raise BoundaryConditionError(f"non-positive outlet resistance at points {bad}")

    def scaled(self, factor: float) -> "BoundaryConditionSet":
        """Same inlet, all outlet resistances multiplied by ``factor``."""
        if not factor > 0:
            raise BoundaryConditionError(f"resistance factor must be positive, got {factor}")
        return replace(
            self, outlet_resistance={k: r * factor for k, r in self.outlet_resistance.items()}
        )

    def resistance_array(self, tree: CenterlineTree) -> np.ndarray:
        self.validate(tree)
        arr = np.zeros(tree.n_points)
        for k, r in self.outlet_resistance.items():
            arr[k] = r
        return arr


def bc_document(bc: BoundaryConditionSet) -> dict:
    """JSON-ready form of a boundary-condition set."""
    return {
        "aortic_pressure": bc.aortic_pressure,
        "outlet_resistance": {str(k): v for k, v in sorted(bc.outlet_resistance.items())},
        "viscosity": bc.viscosity,
        "density": bc.density,
    }


def bc_from_document(doc: dict) -> BoundaryConditionSet:
    return BoundaryConditionSet(
        aortic_pressure=float(doc["aortic_pressure"]),
        outlet_resistance={int(k): float(v) for k, v in doc["outlet_resistance"].items()},
        viscosity=float(doc.get("viscosity", VISCOSITY)),
        density=float(doc.get("density", DENSITY)),
    )


@dataclass(frozen=True)
class HemodynamicSolution:
    """Per-point pressures/FFR and per-edge flows for one flow state."""

    pressures: np.ndarray
    flows: np.ndarray  # indexed by edge child id; entry 0 is NaN
    ffr: np.ndarray
    ostial_flow: float
    converged: bool
    iterations: int


def segment_loss(seg: SegmentGeometry, viscosity: float = VISCOSITY, density: float = DENSITY, kappa: float = KAPPA) -> tuple[float, float]:
    """Affine loss coefficients (a, b) for one segment: dP = a*Q + b*Q^2."""
    a = 8.0 * viscosity * seg.length / (math.pi * seg.mean_radius**4)
    b = 0.5 * density * (1.0 / seg.area_distal**2 - 1.0 / seg.area_proximal**2)
    if b < 0.0:
        b *= kappa
    return a, b


def edge_coefficient_arrays(
    tree: CenterlineTree, viscosity: float = VISCOSITY, density: float = DENSITY, kappa: float = KAPPA
) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge (a, b) arrays indexed by child id; entry 0 is zero."""
    rp = tree.radius[tree.parent]
    rd = tree.radius
    rm = 0.5 * (rp + rd)
    with np.errstate(divide="ignore"):
        a = 8.0 * viscosity * tree.arc_length / (math.pi * rm**4)
    ap = math.pi * rp**2
    ad = math.pi * rd**2
    b = 0.5 * density * (1.0 / ad**2 - 1.0 / ap**2)
    b = np.where(b < 0.0, kappa * b, b)
    a[0] = 0.0
    b[0] = 0.0
    return a, b


def solve_network(
    tree: CenterlineTree,
    a: np.ndarray,
    b: np.ndarray,
    outlet_r: np.ndarray,
    aortic_pressure: float,
    tol: float = 1e-3,
    max_iterations: int = 200,
    damping: float = 0.5,
    backend: str | None = None,
) -> HemodynamicSolution:
    """Damped fixed point on prescribed per-edge affine coefficients."""
    n = tree.n_points
    q = np.zeros(n)
    prev_ostial = math.inf
    converged = False
    iterations = 0
    q_lin = q
    r_edge = a.copy()
    for iterations in range(1, max_iterations + 1):
        r_edge = a + b * q
        r_eff, r_down = _kernels.downstream_resistance(tree, r_edge, outlet_r, backend=backend)
        ostial = aortic_pressure / r_eff[0]
        q_lin = _kernels.distribute_flow(tree, ostial, r_eff, r_down, backend=backend)
        if abs(ostial - prev_ostial) < tol * prev_ostial:
            converged = True
            break
        prev_ostial = ostial
        q = damping * q + (1.0 - damping) * q_lin
        q[0] = 0.0

    drop = r_edge * q_lin
    drop[0] = 0.0
    pressures = _kernels.integrate_pressures(tree, drop, aortic_pressure, backend=backend)
    flows = q_lin.copy()
    flows[0] = np.nan
    return HemodynamicSolution(
        pressures=pressures,
        flows=flows,
        ffr=pressures / aortic_pressure,
        ostial_flow=float(flows[int(tree.children_of(0)[0])]),
        converged=converged,
        iterations=iterations,
    )


def solve_steady(
    tree: CenterlineTree,
    bc: BoundaryConditionSet,
    kappa: float = KAPPA,
    tol: float = 1e-3,
    max_iterations: int = 200,
    damping: float = 0.5,
    backend: str | None = None,
) -> HemodynamicSolution:
    """Solve the tree with geometry-derived coefficients and the given closure."""
    outlet_r = bc.resistance_array(tree)
    a, b = edge_coefficient_arrays(tree, bc.viscosity, bc.density, kappa)
    return solve_network(
        tree, a, b, outlet_r, bc.aortic_pressure,
        tol=tol, max_iterations=max_iterations, damping=damping, backend=backend,
    )


@dataclass(frozen=True)
class AnchorSet:
    """The four reference solutions a response surface is anchored to."""

    patient_tree: CenterlineTree
    ideal_tree: CenterlineTree
    bc_hyperemia: BoundaryConditionSet
    bc_superemia: BoundaryConditionSet
    patient_hyper: HemodynamicSolution
    patient_super: HemodynamicSolution
    ideal_hyper: HemodynamicSolution
    ideal_super: HemodynamicSolution
    kappa: float = KAPPA

    def all_converged(self) -> bool:
        return all(
            s.converged for s in (self.patient_hyper, self.patient_super, self.ideal_hyper, self.ideal_super)
        )


def run_anchors(
    patient_tree: CenterlineTree,
    ideal_radius: np.ndarray,
    bc_hyperemia: BoundaryConditionSet,
    superemia_factor: float = SUPEREMIA_FACTOR,
    kappa: float = KAPPA,
    tol: float = 1e-3,
    max_iterations: int = 200,
    backend: str | None = None,
) -> AnchorSet:
    """Solve the two geometries under the two flow states."""
    from .ideal import dilated_tree

    ideal_tree = dilated_tree(patient_tree, ideal_radius, 1.0)
    bc_super = bc_hyperemia.scaled(superemia_factor)
    kw = dict(kappa=kappa, tol=tol, max_iterations=max_iterations, backend=backend)
    return AnchorSet(
        patient_tree=patient_tree,
        ideal_tree=ideal_tree,
        bc_hyperemia=bc_hyperemia,
        bc_superemia=bc_super,
        patient_hyper=solve_steady(patient_tree, bc_hyperemia, **kw),
        patient_super=solve_steady(patient_tree, bc_super, **kw),
        ideal_hyper=solve_steady(ideal_tree, bc_hyperemia, **kw),
        ideal_super=solve_steady(ideal_tree, bc_super, **kw),
        kappa=kappa,
    )


def solution_table(tree: CenterlineTree, sol: HemodynamicSolution) -> str:
    """Per-point table: id, arc position, radius, pressure, FFR, inflow."""
    lines = ["id,arc_from_root,radius,pressure,ffr,inflow"]
    arc = tree.arc_from_root
    for i in range(tree.n_points):
        inflow = "" if i == 0 else repr(float(sol.flows[i]))
        lines.append(
            f"{i},{arc[i]!r},{tree.radius[i]!r},{float(sol.pressures[i])!r},{float(sol.ffr[i])!r},{inflow}"
        )
    return "\n".join(lines) + "\n"
