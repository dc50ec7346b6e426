"""Command line front end: ideal fitting, surface builds, what-if solves, serving.

Every subcommand reads and writes the package's text formats (tree documents,
ideal profiles, surface documents, solution tables) so pipelines can be
scripted without touching the Python API.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .generator import boundary_conditions
from .ideal import GRID_RESOLUTION, fit_ideal, load_profile, save_profile
from .intervention import PlanError
from .oracle import (
    KAPPA,
    SUPEREMIA_FACTOR,
    BoundaryConditionError,
    bc_from_document,
    run_anchors,
    solution_table,
)
from .solver import SolverConfig, solve
from .surface import EnvelopeError, ResponseSurface, SurfaceBuildError, build_surface
from .tree import CenterlineTree, TreeValidationError

USER_ERRORS = (
    TreeValidationError,
    BoundaryConditionError,
    SurfaceBuildError,
    EnvelopeError,
    PlanError,
    ValueError,
    OSError,
)


def _load_bc(path, tree):
    """Boundary conditions from a file, or Murray-law defaults for the tree."""
    if path is None:
        return boundary_conditions(tree)
    return bc_from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def parse_edges(text: str) -> tuple[int, ...]:
    """Comma-separated edge ids with inclusive ranges, e.g. ``40,41,50-62``."""
    ids: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "-" in token[1:]:
            lo, hi = token.split("-", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"edge range {token!r} runs backwards")
            ids.extend(range(lo_i, hi_i + 1))
        else:
            ids.append(int(token))
    return tuple(ids)


def _cmd_fit_ideal(args) -> int:
    tree = CenterlineTree.load(args.in_path)
    result = fit_ideal(tree, resolution=args.resolution)
    save_profile(args.out_path, tree, result)
    print(f"wrote ideal profile for {tree.n_points} points to {args.out_path}")
    return 0


def _cmd_build(args) -> int:
    tree = CenterlineTree.load(args.in_path)
    bc = _load_bc(args.bc, tree)
    ideal = load_profile(args.ideal) if args.ideal else fit_ideal(tree).radius
    t0 = time.perf_counter()
    anchors = run_anchors(
        tree, ideal, bc, superemia_factor=args.superemia_factor, kappa=args.kappa
    )
    surface = build_surface(anchors, tol1=args.tol1)
    elapsed = time.perf_counter() - t0
    surface.save(args.out_path)
    print(f"built surface for {tree.n_points} points in {elapsed:.2f} s; wrote {args.out_path}")
    return 0


def _cmd_solve(args) -> int:
    surface = ResponseSurface.load(args.surface)
    modified = CenterlineTree.load(args.modified) if args.modified else None
    edges = parse_edges(args.edges) if args.edges else ()
    config = SolverConfig(tol2=args.tol2, bc_scaling_enabled=args.bc_scaling)
    t0 = time.perf_counter()
    result = solve(surface, modified, edges, config)
    elapsed = time.perf_counter() - t0
    tree = modified if modified is not None else surface.patient_tree
    meta = (
        f"# converged={'true' if result.converged else 'false'}"
        f" iterations={result.iterations}"
        f" ostial_flow={float(result.solution.ostial_flow)!r}"
        f" runtime_s={elapsed:.4f}\n"
    )
    text = meta + solution_table(tree, result.solution)
    if args.out_path:
        Path(args.out_path).write_text(text, encoding="utf-8")
        print(f"wrote solution table to {args.out_path}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        store_dir=args.store_dir,
        max_models=args.max_models,
        tol2=args.tol2,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psrom", description="reduced-order coronary planning tools")
    sub = p.add_subparsers(dest="command", required=True)

    fi = sub.add_parser("fit-ideal", help="fit the healthy ideal radius profile for a tree")
    fi.add_argument("--in", dest="in_path", required=True, help="tree document")
    fi.add_argument("--out", dest="out_path", required=True, help="ideal profile output")
    fi.add_argument("--resolution", type=float, default=GRID_RESOLUTION, help="radius grid step (cm)")
    fi.set_defaults(func=_cmd_fit_ideal)

    b = sub.add_parser("build", help="solve the four reference states and build a response surface")
    b.add_argument("--in", dest="in_path", required=True, help="tree document")
    b.add_argument("--out", dest="out_path", required=True, help="surface document output")
    b.add_argument("--bc", default=None, help="boundary-condition file (default: Murray-law outlets)")
    b.add_argument("--ideal", default=None, help="precomputed ideal profile (default: fit now)")
    b.add_argument("--superemia-factor", type=float, default=SUPEREMIA_FACTOR)
    b.add_argument("--kappa", type=float, default=KAPPA, help="expansion recovery efficiency")
    b.add_argument("--tol1", type=float, default=0.1, help="relative flow gap below which fits fall back")
    b.set_defaults(func=_cmd_build)

    s = sub.add_parser("solve", help="evaluate a what-if geometry against a built surface")
    s.add_argument("--surface", required=True, help="surface document")
    s.add_argument("--modified", default=None, help="modified tree document (default: patient tree)")
    s.add_argument("--edges", default=None, help="modified edge ids, e.g. 40,41,50-62")
    s.add_argument("--out", dest="out_path", default=None, help="solution table output (default: stdout)")
    s.add_argument("--tol2", type=float, default=0.02, help="ostial-flow convergence tolerance")
    s.add_argument("--bc-scaling", action=argparse.BooleanOptionalAction, default=True,
                   help="rescale outlet resistances with ostial pressure during iteration")
    s.set_defaults(func=_cmd_solve)

    sv = sub.add_parser("serve", help="run the planning service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8080)
    sv.add_argument("--store-dir", default=None, help="directory for persisted surfaces")
    sv.add_argument("--max-models", type=int, default=32)
    sv.add_argument("--tol2", type=float, default=0.02)
    sv.set_defaults(func=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
