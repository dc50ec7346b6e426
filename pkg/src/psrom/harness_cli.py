"""Batch validation command line: generate cases, run the protocol, grade results.

Subcommands:

* ``generate`` writes seeded synthetic case files (tree + boundary conditions
  + manifest) for inspection or external tooling.
* ``run`` executes the full validation protocol and writes the report tables.
* ``stats`` re-grades an existing comparisons table, e.g. with a different
  stratifier.
* ``report`` prints a digest of a report directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .generator import LESION_KINDS, GeneratorConfig, case_stream
from .harness import (
    HarnessConfig,
    compute_stats,
    export_report,
    export_summaries,
    read_comparisons,
    run_batch,
)
from .oracle import KAPPA, bc_document

STRATIFIERS = ("none", "lesion", "ffr")


def _generator_config(kind: str | None) -> GeneratorConfig:
    return GeneratorConfig(lesion_kind=kind) if kind else GeneratorConfig()


def _cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ["case_id,seed,kind,n_points,n_implants"]
    for case in case_stream(args.seed, args.cases, _generator_config(args.kind)):
        case.tree.save(out / f"{case.case_id}.tree.json")
        bc_path = out / f"{case.case_id}.bc.json"
        bc_path.write_text(json.dumps(bc_document(case.bc), indent=1) + "\n", encoding="utf-8")
        manifest.append(f"{case.case_id},{case.seed},{case.kind},{case.tree.n_points},{len(case.implants)}")
    (out / "cases.csv").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    print(f"wrote {args.cases} cases to {out}")
    return 0


def _summary_lines(summaries, notes) -> list[str]:
    lines = []
    for name, s in summaries.items():
        lines.append(
            f"{name}: n={s.n} bias={s.bias:+.5f} sd={s.standard_deviation:.5f}"
            f" r={s.pearson_r:.4f} tost_p={s.tost_p:.3g} chisq_p={s.chisq_p:.3g}"
        )
    lines.extend(f"note: {n}" for n in notes)
    return lines


def _cmd_run(args) -> int:
    config = HarnessConfig(
        seed=args.seed,
        n_cases=args.cases,
        stratify=args.stratify,
        oracle_kappa=args.oracle_kappa,
        tol2=args.tol2,
        bc_scaling=args.bc_scaling,
        generator=_generator_config(args.kind),
    )
    batch = run_batch(config)
    summaries, notes = compute_stats(batch.records, args.stratify)
    paths = export_report(args.out, batch.records, summaries, notes, batch.dropped, args.stratify)
    for line in _summary_lines(summaries, notes):
        print(line)
    print(f"{len(batch.records)} comparisons, {len(batch.dropped)} dropped cases; wrote {Path(args.out)}")
    return 0


def _cmd_stats(args) -> int:
    records = read_comparisons(args.comparisons)
    summaries, notes = compute_stats(records, args.stratify)
    if args.out:
        export_summaries(args.out, summaries, notes, args.stratify)
        print(f"wrote {args.out}")
    else:
        for line in _summary_lines(summaries, notes):
            print(line)
    return 0


def _cmd_report(args) -> int:
    d = Path(args.dir)
    summaries = d / "summaries.csv"
    if not summaries.is_file():
        raise ValueError(f"{d} has no summaries.csv")
    lines = summaries.read_text(encoding="utf-8").splitlines()
    notes = [l[2:] for l in lines if l.startswith("# ") and "oracle" not in l]
    rows = [l.split(",") for l in lines if l and not l.startswith("#")]
    header, body = rows[0], rows[1:]
    idx = {name: i for i, name in enumerate(header)}
    print(f"{'stratum':<14} {'n':>5} {'bias':>9} {'sd':>8} {'r':>7} {'tost_p':>9} {'chisq_p':>9}")
    for row in body:
        print(
            f"{row[idx['stratum']]:<14} {row[idx['n']]:>5}"
            f" {float(row[idx['bias']]):>+9.5f} {float(row[idx['standard_deviation']]):>8.5f}"
            f" {float(row[idx['pearson_r']]):>7.4f}"
            f" {float(row[idx['tost_p']]):>9.3g} {float(row[idx['chisq_p']]):>9.3g}"
        )
    for note in notes:
        print(f"note: {note}")
    hist = d / "runtime_histogram.csv"
    if hist.is_file():
        print("predict runtime histogram (ms):")
        for line in hist.read_text(encoding="utf-8").splitlines():
            if line.startswith("#") or line.startswith("bin_lo_ms"):
                continue
            lo, hi, count = line.split(",")
            print(f"  [{lo}, {hi}): {count}")
    dropped = d / "dropped.csv"
    if dropped.is_file():
        n_dropped = sum(1 for l in dropped.read_text(encoding="utf-8").splitlines() if l and not l.startswith("#")) - 1
        print(f"dropped cases: {n_dropped}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psrom-harness", description="batch validation against the network oracle")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic case files")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--cases", type=int, default=10)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--kind", choices=LESION_KINDS, default=None, help="steer every case to one lesion kind")
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run the validation protocol and write report tables")
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--cases", type=int, default=200)
    r.add_argument("--out", required=True, help="report directory")
    r.add_argument("--stratify", choices=STRATIFIERS, default="none")
    r.add_argument("--oracle-kappa", type=float, default=KAPPA)
    r.add_argument("--tol2", type=float, default=0.02)
    r.add_argument("--bc-scaling", action=argparse.BooleanOptionalAction, default=False,
                   help="let the reduced model rescale outlet resistances in-loop")
    r.add_argument("--kind", choices=LESION_KINDS, default=None)
    r.set_defaults(func=_cmd_run)

    st = sub.add_parser("stats", help="re-grade an existing comparisons table")
    st.add_argument("--comparisons", required=True, help="comparisons.csv from a previous run")
    st.add_argument("--stratify", choices=STRATIFIERS, default="none")
    st.add_argument("--out", default=None, help="summaries output (default: print)")
    st.set_defaults(func=_cmd_stats)

    rp = sub.add_parser("report", help="print a digest of a report directory")
    rp.add_argument("--dir", required=True)
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
