import dataclasses

import numpy as np
import pytest

from psrom.generator import GeneratorConfig, synthetic_case
from psrom.harness import (
    COMPARISON_COLUMNS,
    GROUND_TRUTH_NOTE,
    SUMMARY_COLUMNS,
    BatchResult,
    ComparisonRecord,
    HarnessConfig,
    compute_stats,
    export_report,
    run_batch,
    run_validation_case,
    runtime_histogram,
)


def make_record(kind="focal", truth=0.90, pred=0.905, runtime=0.001, case_id="case-00001", point=10):
    return ComparisonRecord(
        case_id=case_id,
        lesion_kind=kind,
        eval_point=point,
        ffr_oracle=truth,
        ffr_psrom=pred,
        delta=pred - truth,
        ffr_pre_modification=truth - 0.05,
        psrom_runtime=runtime,
        flagged=False,
    )


def test_single_case_produces_accurate_records():
    case = synthetic_case(11, GeneratorConfig(lesion_kind="focal"))
    records, reason = run_validation_case(case)
    assert reason is None
    assert records
    for r in records:
        assert r.case_id == case.case_id
        assert abs(r.delta) <= 0.02
        assert 0.0 < r.ffr_oracle <= 1.0
        assert 0.0 < r.ffr_psrom <= 1.0
        assert r.psrom_runtime > 0.0
        assert not r.flagged


def test_healthy_case_yields_no_records_and_no_drop():
    case = synthetic_case(5)
    healthy = dataclasses.replace(case, tree=case.tree.with_radii(case.healthy_radius))
    records, reason = run_validation_case(healthy)
    assert records == []
    assert reason is None


def test_starved_anchor_solve_drops_case():
    case = synthetic_case(11, GeneratorConfig(lesion_kind="focal"))
    records, reason = run_validation_case(case, HarnessConfig(oracle_max_iterations=1))
    assert records == []
    assert reason == "anchor solve did not converge"


def test_run_batch_collects_records_and_is_seed_stable():
    cfg = HarnessConfig(seed=1, n_cases=2)
    first = run_batch(cfg)
    second = run_batch(cfg)
    assert isinstance(first, BatchResult)
    assert first.records
    key = lambda b: [(r.case_id, r.eval_point, r.ffr_oracle, r.ffr_psrom) for r in b.records]
    assert key(first) == key(second)
    assert first.dropped == second.dropped


def test_compute_stats_unstratified():
    records = [make_record(pred=0.90 + d, truth=0.90) for d in (0.001, 0.002, -0.001, 0.0)]
    summaries, notes = compute_stats(records)
    assert list(summaries) == ["all"]
    assert notes == []
    assert summaries["all"].n == 4


def test_compute_stats_lesion_strata_order_and_omission():
    records = (
        [make_record(kind="serial-member") for _ in range(3)]
        + [make_record(kind="focal") for _ in range(2)]
        + [make_record(kind="ostial")]
    )
    summaries, notes = compute_stats(records, stratify="lesion")
    assert list(summaries) == ["focal", "serial-member"]
    assert notes == ["stratum ostial omitted: only 1 record(s)"]


def test_compute_stats_ffr_strata():
    records = [make_record(truth=t, pred=t + 0.002) for t in (0.55, 0.60, 0.72, 0.73, 0.95, 0.97)]
    summaries, notes = compute_stats(records, stratify="ffr")
    assert list(summaries) == ["[0.00,0.70)", "[0.70,0.75)", "[0.90,1.00]"]
    assert all(s.n == 2 for s in summaries.values())
    assert notes == []


def test_compute_stats_rejects_unknown_stratifier():
    with pytest.raises(ValueError):
        compute_stats([make_record(), make_record()], stratify="bogus")


def test_runtime_histogram_bins_and_overflow():
    records = [
        make_record(runtime=0.0005),  # 0.5 ms
        make_record(runtime=0.003),  # 3 ms
        make_record(runtime=0.004),  # 4 ms
        make_record(runtime=5.0),  # 5000 ms, overflow
    ]
    bins = runtime_histogram(records)
    assert bins[0] == (0.0, 1.0, 1)
    assert bins[2] == (2.0, 5.0, 2)
    assert bins[-1][1] == float("inf")
    assert bins[-1][2] == 1
    assert sum(c for _, _, c in bins) == len(records)


def test_export_report_writes_deterministic_tables(tmp_path):
    cfg = HarnessConfig(seed=3, n_cases=1)
    outs = []
    for name in ("one", "two"):
        batch = run_batch(cfg)
        summaries, notes = compute_stats(batch.records, stratify="lesion")
        paths = export_report(tmp_path / name, batch.records, summaries, notes, batch.dropped, stratify="lesion")
        outs.append(paths)
    for key in ("comparisons", "summaries"):
        assert outs[0][key].read_bytes() == outs[1][key].read_bytes()
    first_lines = outs[0]["comparisons"].read_text().splitlines()
    assert first_lines[0] == GROUND_TRUTH_NOTE
    assert ",".join(COMPARISON_COLUMNS) in first_lines
    assert outs[0]["runtime_histogram"].exists()
    assert outs[0]["dropped"].read_text().splitlines()[-1] == "case_id,reason"


def test_export_report_empty_records(tmp_path):
    paths = export_report(tmp_path, [], {}, notes=["stratum focal omitted: only 1 record(s)"])
    comp = paths["comparisons"].read_text().splitlines()
    assert comp[-1] == ",".join(COMPARISON_COLUMNS)
    summ = paths["summaries"].read_text().splitlines()
    assert summ[-1] == ",".join(SUMMARY_COLUMNS)
    assert any("omitted" in line for line in summ if line.startswith("#"))


def test_summary_row_matches_stats(tmp_path):
    rng = np.random.default_rng(7)
    truth = rng.uniform(0.6, 1.0, 40)
    records = [make_record(truth=float(t), pred=float(t + d)) for t, d in zip(truth, rng.normal(0.002, 0.005, 40))]
    summaries, _ = compute_stats(records)
    paths = export_report(tmp_path, records, summaries)
    lines = [l for l in paths["summaries"].read_text().splitlines() if not l.startswith("#")]
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["stratum"] == "all"
    assert float(row["bias"]) == pytest.approx(summaries["all"].bias, rel=0, abs=0)
    assert float(row["pearson_r"]) == pytest.approx(summaries["all"].pearson_r, rel=0, abs=0)
    assert row["n"] == "40"
