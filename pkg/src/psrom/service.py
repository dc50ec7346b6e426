"""Planning service: upload a tree, list lesions, evaluate what-if plans.

Models are keyed by a hash of the canonical tree document, so re-uploading
the same tree returns the existing build. Built surfaces are immutable;
evaluations are pure solves against them, safe to run concurrently. The
store is in-memory with least-recently-used eviction and an optional
directory spill so builds survive restarts.
"""

from __future__ import annotations

import hashlib
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .generator import boundary_conditions
from .ideal import fit_ideal
from .intervention import (
    Lesion,
    ModificationPlan,
    PlanError,
    StentInterval,
    apply_modification,
    default_plan,
    detect_lesions,
    select_evaluation_points,
)
from .oracle import BoundaryConditionError, bc_from_document, run_anchors
from .solver import SolverConfig, solve
from .surface import EnvelopeError, ResponseSurface, SurfaceBuildError, build_surface
from .tree import CenterlineTree, TreeValidationError

ANCHOR_LABELS = ("patient_hyper", "patient_super", "ideal_hyper", "ideal_super")


def model_id_for(tree: CenterlineTree) -> str:
    """Content hash of the canonical tree document (16 hex chars)."""
    return hashlib.sha256(tree.dumps().encode("utf-8")).hexdigest()[:16]


@dataclass
class ModelSession:
    model_id: str
    surface: ResponseSurface
    lesions: tuple[Lesion, ...]
    created: float
    build_seconds: float


class ModelStore:
    """Thread-safe LRU map of built models with optional directory spill."""

    def __init__(self, max_models: int = 32, store_dir=None):
        if max_models < 1:
            raise ValueError("max_models must be at least 1")
        self.max_models = max_models
        self.store_dir = Path(store_dir) if store_dir else None
        if self.store_dir:
            self.store_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._models: OrderedDict[str, ModelSession] = OrderedDict()
        self._build_locks: dict[str, threading.Lock] = {}

    def build_lock(self, model_id: str) -> threading.Lock:
        with self._lock:
            return self._build_locks.setdefault(model_id, threading.Lock())

    def _spill_path(self, model_id: str) -> "Path | None":
        return self.store_dir / f"{model_id}.surface.json" if self.store_dir else None

    def get(self, model_id: str) -> "ModelSession | None":
        with self._lock:
            session = self._models.get(model_id)
            if session is not None:
                self._models.move_to_end(model_id)
                return session
        path = self._spill_path(model_id)
        if path is None or not path.is_file():
            return None
        surface = ResponseSurface.load(path)
        if model_id_for(surface.patient_tree) != model_id:
            raise SurfaceBuildError(f"stored surface {path} does not match id {model_id}")
        session = ModelSession(
            model_id=model_id,
            surface=surface,
            lesions=tuple(detect_lesions(surface.patient_tree, surface.ideal_tree.radius)),
            created=time.time(),
            build_seconds=0.0,
        )
        self.put(session)
        return session

    def put(self, session: ModelSession) -> None:
        path = self._spill_path(session.model_id)
        if path is not None and not path.is_file():
            session.surface.save(path)
        with self._lock:
            self._models[session.model_id] = session
            self._models.move_to_end(session.model_id)
            while len(self._models) > self.max_models:
                self._models.popitem(last=False)

    def delete(self, model_id: str) -> bool:
        with self._lock:
            found = self._models.pop(model_id, None) is not None
            self._build_locks.pop(model_id, None)
        path = self._spill_path(model_id)
        if path is not None and path.is_file():
            path.unlink()
            found = True
        return found

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._models)


class IntervalBody(BaseModel):
    path_id: int
    arc_start: float
    arc_end: float
    target_fraction: float = 1.0


class PlanBody(BaseModel):
    intervals: list[IntervalBody] = Field(default_factory=list)
    blend_length: float = 0.2


class EvaluateBody(BaseModel):
    plan: PlanBody = Field(default_factory=PlanBody)
    paths: "list[int] | None" = None


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def _lesion_payload(lesion: Lesion) -> dict:
    plan = default_plan(lesion)
    return {
        "path_id": lesion.path_id,
        "arc_start": lesion.arc_start,
        "arc_end": lesion.arc_end,
        "max_narrowing": lesion.max_narrowing,
        "kind": lesion.kind,
        "n_points": len(lesion.member_point_ids),
        "default_plan": {
            "intervals": [
                {
                    "path_id": iv.path_id,
                    "arc_start": iv.arc_start,
                    "arc_end": iv.arc_end,
                    "target_fraction": iv.target_fraction,
                }
                for iv in plan.intervals
            ],
            "blend_length": plan.blend_length,
        },
    }


def _trace_payload(tree: CenterlineTree, outlet: int, pre_ffr, post_ffr=None) -> dict:
    ids = tree.path_points(int(outlet))
    payload = {
        "points": [int(i) for i in ids],
        "arc": [float(a) for a in tree.arc_from_root[ids]],
        "ffr_pre": [float(v) for v in pre_ffr[ids]],
    }
    if post_ffr is not None:
        payload["ffr_post"] = [float(v) for v in post_ffr[ids]]
    return payload


def create_app(
    store_dir=None,
    max_models: int = 32,
    tol2: float = 0.02,
    oracle_tol: float = 1e-3,
    oracle_max_iterations: int = 200,
    bc_scaling: bool = True,
) -> FastAPI:
    app = FastAPI(title="psrom planner", version="0.1.0")
    # the planning UI is served from its own origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = ModelStore(max_models=max_models, store_dir=store_dir)
    app.state.store = store
    solver_config = SolverConfig(tol2=tol2, bc_scaling_enabled=bc_scaling)

    def session_or_404(model_id: str) -> ModelSession:
        session = store.get(model_id)
        if session is None:
            raise _error(404, "unknown_model", f"no model {model_id!r}")
        return session

    @app.post("/models", status_code=201)
    def create_model(document: dict = Body(...)):
        try:
            tree = CenterlineTree.from_document(document)
        except (TreeValidationError, KeyError, TypeError, ValueError) as exc:
            raise _error(422, "invalid_tree", str(exc))
        model_id = model_id_for(tree)
        with store.build_lock(model_id):
            session = store.get(model_id)
            if session is None:
                try:
                    if "boundary_conditions" in document:
                        bc = bc_from_document(document["boundary_conditions"])
                    else:
                        bc = boundary_conditions(tree)
                    bc.validate(tree)
                except (BoundaryConditionError, KeyError, TypeError, ValueError) as exc:
                    raise _error(422, "invalid_boundary_conditions", str(exc))
                t0 = time.perf_counter()
                ideal = fit_ideal(tree).radius
                try:
                    anchors = run_anchors(
                        tree, ideal, bc, tol=oracle_tol, max_iterations=oracle_max_iterations
                    )
                    surface = build_surface(anchors)
                except SurfaceBuildError as exc:
                    raise _error(502, "anchor_convergence", str(exc))
                session = ModelSession(
                    model_id=model_id,
                    surface=surface,
                    lesions=tuple(detect_lesions(tree, ideal)),
                    created=time.time(),
                    build_seconds=time.perf_counter() - t0,
                )
                store.put(session)
        anchors = session.surface.anchors
        outlet_ids = [int(i) for i in session.surface.patient_tree.outlet_ids]
        anchor_ffr = {
            label: {str(i): float(getattr(anchors, label).ffr[i]) for i in outlet_ids}
            for label in ANCHOR_LABELS
        }
        return {
            "model_id": session.model_id,
            "n_points": session.surface.patient_tree.n_points,
            "n_lesions": len(session.lesions),
            "anchor_ffr_at_outlets": anchor_ffr,
            "build_seconds": session.build_seconds,
        }

    @app.get("/models/{model_id}/lesions")
    def list_lesions(model_id: str):
        session = session_or_404(model_id)
        return {
            "model_id": model_id,
            "lesions": [_lesion_payload(l) for l in session.lesions],
        }

    @app.post("/models/{model_id}/evaluate")
    def evaluate_plan(model_id: str, body: EvaluateBody):
        session = session_or_404(model_id)
        surface = session.surface
        tree = surface.patient_tree
        try:
            plan = ModificationPlan(
                intervals=tuple(
                    StentInterval(
                        path_id=iv.path_id,
                        arc_start=iv.arc_start,
                        arc_end=iv.arc_end,
                        target_fraction=iv.target_fraction,
                    )
                    for iv in body.plan.intervals
                ),
                blend_length=body.plan.blend_length,
            )
            modified, edges = apply_modification(tree, surface.ideal_tree.radius, plan)
        except PlanError as exc:
            raise _error(422, "invalid_plan", str(exc))
        t0 = time.perf_counter()
        try:
            result = solve(surface, modified, edges, solver_config)
        except EnvelopeError as exc:
            intervals = [
                (iv.path_id, iv.arc_start, iv.arc_end, iv.target_fraction)
                for iv in body.plan.intervals
            ]
            raise _error(422, "envelope", f"{exc}; plan intervals: {intervals}")
        runtime = time.perf_counter() - t0

        points = select_evaluation_points(modified, edges)
        pre = surface.anchors.patient_hyper.ffr
        post = result.solution.ffr
        outlet_ids = [int(i) for i in tree.outlet_ids]
        if body.paths is None:
            if len(edges):
                edge_set = set(int(e) for e in edges)
                wanted = [o for o in outlet_ids if edge_set & set(int(p) for p in tree.path_points(o))]
            else:
                wanted = outlet_ids
        else:
            unknown = [p for p in body.paths if p not in outlet_ids]
            if unknown:
                raise _error(422, "unknown_path", f"not outlet points: {unknown}")
            wanted = [int(p) for p in body.paths]
        return {
            "model_id": model_id,
            "converged": result.converged,
            "iterations": result.iterations,
            "runtime_seconds": runtime,
            "modified_edges": [int(e) for e in edges],
            "evaluation_points": [int(p) for p in points],
            "ffr_at_evaluation_points": {str(p): float(post[p]) for p in points},
            "traces": {str(o): _trace_payload(modified, o, pre, post) for o in wanted},
        }

    @app.get("/models/{model_id}/traces")
    def get_traces(model_id: str, path: "int | None" = Query(default=None)):
        session = session_or_404(model_id)
        tree = session.surface.patient_tree
        pre = session.surface.anchors.patient_hyper.ffr
        outlet_ids = [int(i) for i in tree.outlet_ids]
        if path is not None:
            if path not in outlet_ids:
                raise _error(422, "unknown_path", f"not an outlet point: {path}")
            wanted = [path]
        else:
            wanted = outlet_ids
        return {
            "model_id": model_id,
            "traces": {str(o): _trace_payload(tree, o, pre) for o in wanted},
        }

    @app.delete("/models/{model_id}", status_code=204)
    def delete_model(model_id: str):
        if not store.delete(model_id):
            raise _error(404, "unknown_model", f"no model {model_id!r}")

    return app
