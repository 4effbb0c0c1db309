# -*- coding: utf-8 -*-
"""Tests for the compile/run/baseline/sweep drivers."""

import json
from pathlib import Path
from typing import Any

import pandas as pd
import pytest

from src.config import BenchmarkSpec, RunConfig, SweepSpec, override
from src.experiments import (
    CSV_SCHEMA_VERSION,
    cmd_baseline,
    cmd_compile,
    cmd_run,
    cmd_sweep,
    summarize,
    sweep_csv_path,
    synthetic_ir,
    trial_key,
)
from src.ir import VirtualHardwareConfig, ir_from_json, serialize_program, validate_ir
from src.mapper import ir_metrics
from src.online import ExecutionReport, recount_fusions


def perfect_run(out_dir: Path, **overrides: Any) -> RunConfig:
    """qaoa-4 on 2x2 virtual hardware with every fusion succeeding"""
    hardware = {"rsl_width": 8, "rsl_height": 8, "p_fusion": 1.0, "retry_batches": 0}
    hardware.update(overrides)
    return RunConfig.model_validate(
        {"hardware": hardware, "trials": 2, "out_dir": str(out_dir)}
    )


def test_compile_writes_artifacts(tmp_path: Path) -> None:
    compiled = cmd_compile(RunConfig(out_dir=tmp_path))
    directory = tmp_path / "qaoa-4"
    for name in ("circuit.txt", "pattern.txt", "ir.json", "program.txt"):
        assert (directory / name).exists()
    metrics = json.loads((directory / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["logical_layers"] == compiled.metrics.logical_layers > 0
    assert sum(metrics["opcode_counts"].values()) == len(compiled.program.instructions)
    ir = ir_from_json((directory / "ir.json").read_text(encoding="utf-8"))
    assert validate_ir(ir) == []
    assert ir_metrics(ir) == compiled.metrics
    program_text = (directory / "program.txt").read_text(encoding="utf-8")
    assert program_text == serialize_program(compiled.program)


def test_empty_circuit_runs_without_resources(tmp_path: Path) -> None:
    circuit = tmp_path / "empty.txt"
    circuit.write_text("qubits 0\n", encoding="utf-8")
    run = RunConfig(
        benchmark=BenchmarkSpec(name=None, circuit_file=circuit), out_dir=tmp_path
    )
    summary = cmd_run(run)
    assert summary.benchmark == "empty"
    assert summary.logical_layers == 0
    assert summary.successes == run.trials
    assert summary.rsl.mean == 0.0


def test_perfect_fusion_needs_one_rsl_per_layer(tmp_path: Path) -> None:
    run = perfect_run(tmp_path)
    summary = cmd_run(run)
    assert summary.successes == 2
    assert summary.rsl_values == [summary.logical_layers] * 2
    assert summary.rsl.std == 0.0
    assert summary.fusion_values[0] == summary.fusion_values[1]

    trials = tmp_path / "qaoa-4" / "trials" / trial_key(run)
    reports = [
        ExecutionReport.model_validate_json(
            (trials / f"trial_{t:03d}.json").read_text(encoding="utf-8")
        )
        for t in range(2)
    ]
    assert [r.fusions_attempted for r in reports] == summary.fusion_values
    events = (trials / "events_000.jsonl").read_text(encoding="utf-8")
    assert recount_fusions(events.splitlines()) == reports[0].fusions_attempted

    report = json.loads((tmp_path / "qaoa-4" / "report.json").read_text("utf-8"))
    assert report["config_digest"] == trial_key(run)
    assert report["rsl"]["mean"] == summary.logical_layers
    timing = json.loads((tmp_path / "qaoa-4" / "timing.json").read_text("utf-8"))
    assert len(timing["trial_seconds"]) == 2


def test_repeated_runs_reuse_trial_files(tmp_path: Path) -> None:
    run = override(perfect_run(tmp_path), {"hardware": {"p_fusion": 0.9}})
    first = cmd_run(run)
    report = (tmp_path / "qaoa-4" / "report.json").read_text(encoding="utf-8")
    second = cmd_run(run)
    assert first == second
    assert (tmp_path / "qaoa-4" / "report.json").read_text("utf-8") == report
    timing = json.loads((tmp_path / "qaoa-4" / "timing.json").read_text("utf-8"))
    assert timing["trial_seconds"] == [None, None]
    assert timing["seconds_per_rsl"] is None


def test_trial_key_tracks_outcome_inputs(tmp_path: Path) -> None:
    run = perfect_run(tmp_path)
    assert trial_key(run) == trial_key(
        override(run, {"trials": 9, "workers": 3, "out_dir": "elsewhere"})
    )
    assert trial_key(run) != trial_key(override(run, {"hardware": {"seed": 1}}))
    assert len(trial_key(run)) == 12


def test_capped_trials_are_reported_as_aborts(tmp_path: Path) -> None:
    summary = cmd_run(perfect_run(tmp_path, rsl_cap=1))
    assert summary.successes == 0
    assert summary.aborted == 2
    assert summary.aborts == {"rsl-cap": 2}
    assert summary.rsl.mean is None
    assert summary.rsl_values == [1, 1]


def test_baseline_with_perfect_fusion(tmp_path: Path) -> None:
    summary = cmd_baseline(perfect_run(tmp_path))
    assert summary.mode == "baseline"
    assert summary.rsl_values == [summary.logical_layers] * 2
    assert (tmp_path / "qaoa-4" / "baseline.json").exists()
    assert (tmp_path / "qaoa-4" / "timing_baseline.json").exists()


def test_summarize_over_successful_trials() -> None:
    reports = [
        ExecutionReport(success=True, rsl_consumed=4, fusions_attempted=10),
        ExecutionReport(success=True, rsl_consumed=6, fusions_attempted=14),
        ExecutionReport(
            success=False, abort_reason="rsl-cap", rsl_consumed=9, fusions_attempted=99
        ),
    ]
    summary = summarize(reports, "online", "demo", "abc", 3, 1)
    assert (summary.rsl.mean, summary.rsl.std) == (5.0, 1.0)
    assert (summary.fusions.mean, summary.fusions.std) == (12.0, 2.0)
    assert summary.aborts == {"rsl-cap": 1}
    assert summary.rsl_values == [4, 6, 9]
    assert json.loads(summary.to_json())["schema_version"] == 1


def test_synthetic_program_is_a_full_cluster() -> None:
    ir = synthetic_ir(3, VirtualHardwareConfig(width=2, height=2))
    assert validate_ir(ir) == []
    metrics = ir_metrics(ir)
    assert metrics.logical_layers == 3
    assert metrics.mapped_nodes == 12
    assert metrics.spatial_edges == 12
    assert metrics.temporal_edges == 8


def renorm_spec(out_dir: Path, workers: int = 1) -> SweepSpec:
    return SweepSpec.model_validate(
        {
            "kind": "renorm",
            "parameter": "node_size",
            "values": [4, 100],
            "trials": 2,
            "base": {
                "hardware": {
                    "rsl_width": 12,
                    "rsl_height": 12,
                    "p_fusion": 1.0,
                    "retry_batches": 0,
                },
                "workers": workers,
                "out_dir": str(out_dir),
            },
        }
    )


def test_renorm_sweep_rows(tmp_path: Path) -> None:
    df = cmd_sweep(renorm_spec(tmp_path))
    assert list(df.columns[:4]) == ["schema_version", "kind", "parameter", "value"]
    assert df["value"].tolist() == [4, 100]
    assert df.loc[0, "success_rate"] == 1.0
    assert df.loc[0, "mean_size"] == 9.0
    assert (df.loc[0, "target_width"], df.loc[0, "target_height"]) == (3, 3)
    assert pd.isna(df.loc[0, "error"])
    assert "below node size" in df.loc[1, "error"]

    table = pd.read_csv(sweep_csv_path(renorm_spec(tmp_path)))
    assert (table["schema_version"] == CSV_SCHEMA_VERSION).all()
    assert table.loc[0, "std_size"] == 0.0


def test_sweep_csv_is_independent_of_worker_count(tmp_path: Path) -> None:
    cmd_sweep(renorm_spec(tmp_path / "serial", workers=1))
    cmd_sweep(renorm_spec(tmp_path / "pooled", workers=3))
    serial = sweep_csv_path(renorm_spec(tmp_path / "serial"))
    pooled = sweep_csv_path(renorm_spec(tmp_path / "pooled"))
    assert serial.read_bytes() == pooled.read_bytes()


def test_module_count_sweep_compares_with_unlimited_size(tmp_path: Path) -> None:
    spec = SweepSpec.model_validate(
        {
            "kind": "renorm",
            "parameter": "module_count",
            "values": [1, 4],
            "trials": 1,
            "base": {
                "hardware": {
                    "rsl_width": 48,
                    "rsl_height": 48,
                    "p_fusion": 1.0,
                    "retry_batches": 0,
                },
                "out_dir": str(tmp_path),
            },
        }
    )
    df = cmd_sweep(spec)
    assert df["mean_size"].tolist() == [144.0, 100.0]
    assert df["mean_unlimited_size"].tolist() == [144.0, 144.0]
    assert df.loc[1, "modular_fraction"] == pytest.approx(100 / 144)


def test_ratio_sweep_with_perfect_fusion(tmp_path: Path) -> None:
    spec = SweepSpec.model_validate(
        {
            "kind": "ratio",
            "parameter": "p_fusion",
            "values": [1.0],
            "trials": 2,
            "ratio_layers": 5,
            "base": {
                "hardware": {"rsl_width": 8, "rsl_height": 8, "retry_batches": 0},
                "out_dir": str(tmp_path),
            },
        }
    )
    df = cmd_sweep(spec)
    assert df.loc[0, "successes"] == 2
    assert df.loc[0, "mean_ratio"] == 1.0
    assert df.loc[0, "mean_rsl"] == 5.0


def test_run_sweep_keeps_failed_points(tmp_path: Path) -> None:
    base = perfect_run(tmp_path)
    spec = SweepSpec(
        kind="run", parameter="node_size", values=[4, 8], base=base, trials=1
    )
    df = cmd_sweep(spec)
    assert df.loc[0, "successes"] == 1
    assert df.loc[0, "mean_rsl"] == df.loc[0, "logical_layers"]
    assert "exceeds the renormalized size" in df.loc[1, "error"]
    assert (tmp_path / "sweep_run" / "node_size=4" / "qaoa-4" / "report.json").exists()
