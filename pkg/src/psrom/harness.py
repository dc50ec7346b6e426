"""Batch validation of the reduced model against the network oracle.

For each synthetic case the pipeline mirrors the intended clinical loop:
fit the healthy envelope, solve the four reference states, build the
response surface, detect lesions, then for every lesion apply its default
full-idealization plan and compare the oracle's solution of the modified
tree against the reduced-model prediction at probe points past the
recovery window. Deltas are graded with the equivalence statistics and
written to comma-separated reports.

Reports are deterministic for a seed: timing data lives in its own file so
the comparison and summary tables stay byte-identical across runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .generator import GeneratorConfig, SyntheticCase, case_stream
from .ideal import fit_ideal
from .intervention import apply_modification, default_plan, detect_lesions, select_evaluation_points
from .oracle import KAPPA, run_anchors, solve_steady
from .solver import SolverConfig, solve
from .stats import FFR_BUCKET_EDGES, StatsSummary, ffr_bucket, summarize
from .surface import build_surface

#: Reporting order for lesion strata.
LESION_STRATA = ("focal", "ostial", "bifurcation", "serial-member")

#: FFR outside (0, this] is carried but flagged in the per-record table.
FFR_FLAG_LIMIT = 1.05

#: Upper edges (ms) of the predict-runtime histogram; one overflow bin follows.
RUNTIME_BIN_EDGES_MS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 250.0, 500.0, 1000.0)

GROUND_TRUTH_NOTE = "# ground truth: desk-scale 1D network oracle (stands in for full 3D CFD)"


@dataclass(frozen=True)
class HarnessConfig:
    seed: int = 1
    n_cases: int = 200
    stratify: str = "none"  # none | lesion | ffr
    oracle_kappa: float = KAPPA
    tol2: float = 0.02
    #: Outlet resistances stay fixed by default so the reduced model answers
    #: the same question as the oracle, whose closure never rescales.
    bc_scaling: bool = False
    oracle_tol: float = 1e-3
    oracle_max_iterations: int = 200
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)


@dataclass(frozen=True)
class ComparisonRecord:
    """One probe-point comparison between oracle truth and prediction."""

    case_id: str
    lesion_kind: str
    eval_point: int
    ffr_oracle: float
    ffr_psrom: float
    delta: float
    ffr_pre_modification: float
    psrom_runtime: float
    flagged: bool


@dataclass(frozen=True)
class BatchResult:
    records: tuple[ComparisonRecord, ...]
    dropped: tuple[tuple[str, str], ...]


def _flag(*ffr_values: float) -> bool:
    return any(not (0.0 < v <= FFR_FLAG_LIMIT) for v in ffr_values)


def run_validation_case(case: SyntheticCase, config: HarnessConfig | None = None):
    """Run the full per-case protocol.

    Returns ``(records, None)`` or ``([], reason)`` when the case must be
    dropped because a solver failed to converge.
    """
    config = config or HarnessConfig()
    ideal = fit_ideal(case.tree).radius
    anchors = run_anchors(
        case.tree,
        ideal,
        case.bc,
        kappa=config.oracle_kappa,
        tol=config.oracle_tol,
        max_iterations=config.oracle_max_iterations,
    )
    if not anchors.all_converged():
        return [], "anchor solve did not converge"
    surface = build_surface(anchors)
    lesions = detect_lesions(case.tree, ideal)
    solver_cfg = SolverConfig(tol2=config.tol2, bc_scaling_enabled=config.bc_scaling)

    records: list[ComparisonRecord] = []
    for lesion in lesions:
        plan = default_plan(lesion)
        modified, edges = apply_modification(case.tree, ideal, plan)
        points = select_evaluation_points(modified, edges)
        if not points:
            continue
        truth = solve_steady(
            modified,
            case.bc,
            kappa=config.oracle_kappa,
            tol=config.oracle_tol,
            max_iterations=config.oracle_max_iterations,
        )
        if not truth.converged:
            return [], f"oracle did not converge on lesion at arc {lesion.arc_start:.2f}"
        t0 = time.perf_counter()
        prediction = solve(surface, modified, edges, solver_cfg)
        runtime = time.perf_counter() - t0
        if not prediction.converged:
            return [], f"reduced model did not converge on lesion at arc {lesion.arc_start:.2f}"
        for p in points:
            f_truth = float(truth.ffr[p])
            f_pred = float(prediction.solution.ffr[p])
            records.append(
                ComparisonRecord(
                    case_id=case.case_id,
                    lesion_kind=lesion.kind,
                    eval_point=int(p),
                    ffr_oracle=f_truth,
                    ffr_psrom=f_pred,
                    delta=f_pred - f_truth,
                    ffr_pre_modification=float(anchors.patient_hyper.ffr[p]),
                    psrom_runtime=runtime,
                    flagged=_flag(f_truth, f_pred),
                )
            )
    return records, None


def run_batch(config: HarnessConfig | None = None) -> BatchResult:
    """Generate and run ``n_cases`` seeded cases in case-id order."""
    config = config or HarnessConfig()
    records: list[ComparisonRecord] = []
    dropped: list[tuple[str, str]] = []
    for case in case_stream(config.seed, config.n_cases, config.generator):
        case_records, reason = run_validation_case(case, config)
        if reason is not None:
            dropped.append((case.case_id, reason))
            continue
        records.extend(case_records)
    return BatchResult(records=tuple(records), dropped=tuple(dropped))


def _stratum_of(record: ComparisonRecord, stratify: str) -> str:
    if stratify == "none":
        return "all"
    if stratify == "lesion":
        return record.lesion_kind
    if stratify == "ffr":
        return ffr_bucket(record.ffr_oracle)
    raise ValueError(f"unknown stratifier {stratify!r} (use none, lesion, or ffr)")


def _stratum_order(stratify: str, present) -> list[str]:
    if stratify == "none":
        return ["all"]
    if stratify == "lesion":
        known = [k for k in LESION_STRATA if k in present]
        return known + sorted(set(present) - set(LESION_STRATA))
    edges = FFR_BUCKET_EDGES
    labels = [f"[{lo:.2f},{hi:.2f})" for lo, hi in zip(edges[:-2], edges[1:-1])]
    labels.append(f"[{edges[-2]:.2f},{edges[-1]:.2f}]")
    return [b for b in labels if b in present]


def compute_stats(records, stratify: str = "none"):
    """Per-stratum summaries plus notes for strata too small to grade."""
    groups: dict[str, list[ComparisonRecord]] = {}
    for rec in records:
        groups.setdefault(_stratum_of(rec, stratify), []).append(rec)

    summaries: dict[str, StatsSummary] = {}
    notes: list[str] = []
    for name in _stratum_order(stratify, groups):
        rows = groups[name]
        if len(rows) < 2:
            notes.append(f"stratum {name} omitted: only {len(rows)} record(s)")
            continue
        truth = np.array([r.ffr_oracle for r in rows])
        pred = np.array([r.ffr_psrom for r in rows])
        summaries[name] = summarize(truth, pred)
    return summaries, notes


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, comment_lines, header, rows) -> None:
    lines = list(comment_lines) + [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def runtime_histogram(records) -> list[tuple[float, float, int]]:
    """Fixed-bin histogram of predict runtimes in milliseconds."""
    ms = np.array([r.psrom_runtime * 1e3 for r in records], dtype=float)
    edges = (0.0,) + RUNTIME_BIN_EDGES_MS
    bins = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        bins.append((lo, hi, int(np.count_nonzero((ms >= lo) & (ms < hi)))))
    bins.append((edges[-1], float("inf"), int(np.count_nonzero(ms >= edges[-1]))))
    return bins


COMPARISON_COLUMNS = (
    "case_id",
    "lesion_kind",
    "eval_point",
    "ffr_oracle",
    "ffr_psrom",
    "delta",
    "ffr_pre_modification",
    "flagged",
)

SUMMARY_COLUMNS = (
    "stratifier",
    "stratum",
    "n",
    "bias",
    "standard_deviation",
    "bias_ci95_lo",
    "bias_ci95_hi",
    "pearson_r",
    "pearson_ci95_lo",
    "pearson_ci95_hi",
    "bland_altman_lo",
    "bland_altman_hi",
    "tost_p",
    "chisq_p",
    "slope",
    "intercept",
)


def export_summaries(path, summaries, notes=(), stratify: str = "none") -> Path:
    """Write the per-stratum summary table on its own."""
    path = Path(path)
    note_lines = [GROUND_TRUTH_NOTE] + [f"# {n}" for n in notes]
    _write_csv(
        path,
        note_lines,
        SUMMARY_COLUMNS,
        [
            (stratify, name) + tuple(s.as_dict()[k] for k in SUMMARY_COLUMNS[2:])
            for name, s in summaries.items()
        ],
    )
    return path


def read_comparisons(path) -> list[ComparisonRecord]:
    """Parse a comparisons table back into records (runtimes are not stored)."""
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l and not l.startswith("#")]
    if not lines or lines[0].split(",") != list(COMPARISON_COLUMNS):
        raise ValueError(f"{path} is not a comparisons table")
    records = []
    for line in lines[1:]:
        row = dict(zip(COMPARISON_COLUMNS, line.split(",")))
        records.append(
            ComparisonRecord(
                case_id=row["case_id"],
                lesion_kind=row["lesion_kind"],
                eval_point=int(row["eval_point"]),
                ffr_oracle=float(row["ffr_oracle"]),
                ffr_psrom=float(row["ffr_psrom"]),
                delta=float(row["delta"]),
                ffr_pre_modification=float(row["ffr_pre_modification"]),
                psrom_runtime=0.0,
                flagged=row["flagged"] == "true",
            )
        )
    return records


def export_report(out_dir, records, summaries, notes=(), dropped=(), stratify: str = "none") -> dict[str, Path]:
    """Write the comparison, summary, runtime, and drop tables.

    Only ``runtime_histogram.csv`` depends on wall-clock timing; the other
    files are byte-stable for a fixed seed and configuration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "comparisons": out / "comparisons.csv",
        "summaries": out / "summaries.csv",
        "runtime_histogram": out / "runtime_histogram.csv",
        "dropped": out / "dropped.csv",
    }

    _write_csv(
        paths["comparisons"],
        [GROUND_TRUTH_NOTE, "# delta = ffr_psrom - ffr_oracle"],
        COMPARISON_COLUMNS,
        [
            (
                r.case_id,
                r.lesion_kind,
                r.eval_point,
                r.ffr_oracle,
                r.ffr_psrom,
                r.delta,
                r.ffr_pre_modification,
                r.flagged,
            )
            for r in records
        ],
    )

    export_summaries(paths["summaries"], summaries, notes, stratify)

    _write_csv(
        paths["runtime_histogram"],
        [GROUND_TRUTH_NOTE, "# predict-call runtimes; regenerated each run"],
        ("bin_lo_ms", "bin_hi_ms", "count"),
        runtime_histogram(records),
    )

    _write_csv(
        paths["dropped"],
        [GROUND_TRUTH_NOTE],
        ("case_id", "reason"),
        list(dropped),
    )
    return paths
