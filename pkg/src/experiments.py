# -*- coding: utf-8 -*-
"""Experiment drivers behind the CLI: compile, run, baseline and sweeps.

Every driver writes its artifacts under the configured output directory.
Reports and CSV tables are deterministic for a given configuration; wall-clock
data only goes to timing.json and the log.
"""

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
)

import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from src.benchmarks import build_benchmark
from src.config import BenchmarkSpec, RunConfig, SweepSpec, override
from src.errors import BenchError, ExecutionAborted, InvalidIRError
from src.frontend import (
    Circuit,
    MeasurementPattern,
    limit_cz_degree,
    load_circuit,
    translate_circuit,
    write_circuit,
)
from src.fusion_layer import build_merged_layer
from src.graphstate import write_graph_text
from src.ir import (
    Coord,
    FlexLatticeIR,
    InstructionProgram,
    VirtualHardwareConfig,
    emit_instructions,
    ir_to_json,
    write_program,
)
from src.mapper import IRMetrics, check_semantics, ir_metrics, map_program
from src.online import (
    DepthModel,
    ExecutionReport,
    OnlineEngine,
    baseline_retry_execute,
    events_to_jsonl,
    layer_rng,
)
from src.renormalization import carve_lattice, unlimited_lattice_size
from src.utils import (
    dumps,
    get_cache_key,
    load_from_cache,
    mean_std,
    write_json,
    write_text,
)

SUMMARY_SCHEMA_VERSION = 1
CSV_SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = "%.6f"

SWEEP_COLUMNS: Dict[str, List[str]] = {
    "run": [
        "trials",
        "successes",
        "mean_rsl",
        "std_rsl",
        "mean_fusions",
        "std_fusions",
        "logical_layers",
    ],
    "baseline": [
        "trials",
        "successes",
        "mean_rsl",
        "std_rsl",
        "mean_fusions",
        "std_fusions",
        "logical_layers",
    ],
    "renorm": [
        "trials",
        "target_width",
        "target_height",
        "success_rate",
        "mean_size",
        "std_size",
        "mean_unlimited_size",
        "modular_fraction",
    ],
    "ratio": [
        "trials",
        "successes",
        "logical_layers",
        "mean_ratio",
        "std_ratio",
        "mean_rsl",
    ],
}

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")
TrialResult = Tuple[ExecutionReport, Optional[float]]


@dataclass
class CompiledProgram:
    """Offline-pass artifacts of one benchmark"""

    label: str
    circuit: Circuit
    pattern: MeasurementPattern
    ir: FlexLatticeIR
    program: InstructionProgram
    metrics: IRMetrics
    seconds: float


class Aggregate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: Optional[float] = None
    std: Optional[float] = None


class RunSummary(BaseModel):
    """Aggregate of per-trial reports; recomputable from the trial files"""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = SUMMARY_SCHEMA_VERSION
    mode: Literal["online", "baseline"]
    benchmark: str
    config_digest: str
    logical_layers: int
    merge_factor: int
    trials: int
    successes: int
    aborts: Dict[str, int]
    rsl: Aggregate
    fusions: Aggregate
    rsl_values: List[int]
    fusion_values: List[int]

    @property
    def aborted(self) -> int:
        return self.trials - self.successes

    def to_json(self) -> str:
        return dumps(self.model_dump(mode="json"))


def summarize(
    reports: Sequence[ExecutionReport],
    mode: Literal["online", "baseline"],
    benchmark: str,
    digest: str,
    logical_layers: int,
    merge_factor: int,
) -> RunSummary:
    """Mean and standard deviation of #RSL and #fusion over successful trials"""
    done = [r for r in reports if r.success]
    aborts = Counter(r.abort_reason or "aborted" for r in reports if not r.success)
    return RunSummary(
        mode=mode,
        benchmark=benchmark,
        config_digest=digest,
        logical_layers=logical_layers,
        merge_factor=merge_factor,
        trials=len(reports),
        successes=len(done),
        aborts=dict(sorted(aborts.items())),
        rsl=Aggregate.model_validate(mean_std(r.rsl_consumed for r in done)),
        fusions=Aggregate.model_validate(mean_std(r.fusions_attempted for r in done)),
        rsl_values=[r.rsl_consumed for r in reports],
        fusion_values=[r.fusions_attempted for r in reports],
    )


def pooled(
    fn: Callable[[ItemT], ResultT],
    items: Sequence[ItemT],
    workers: int,
    desc: str,
    postfix: Optional[Callable[[List[ResultT]], Dict[str, str]]] = None,
) -> List[ResultT]:
    """fn over items in a thread pool; results keep the order of items"""
    results: List[ResultT] = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        pbar = tqdm(executor.map(fn, items), total=len(items), desc=desc)
        for result in pbar:
            results.append(result)
            if postfix is not None:
                pbar.set_postfix(postfix(results))
    return results


def load_benchmark(spec: BenchmarkSpec) -> Circuit:
    if spec.circuit_file is not None:
        return load_circuit(spec.circuit_file)
    assert spec.name is not None
    return build_benchmark(spec.name, spec.qubits, spec.seed)


def compile_program(run: RunConfig) -> CompiledProgram:
    """Circuit -> measurement pattern -> mapped IR -> instruction program

    Raises:
        MappingError: If the mapper cannot place or route the pattern
        InvalidIRError: If the mapped IR breaks an invariant
    """
    start = time.perf_counter()
    circuit = load_benchmark(run.benchmark)
    pattern = translate_circuit(limit_cz_degree(circuit, run.benchmark.max_cz))
    ir = map_program(pattern, run.mapper)
    violations = check_semantics(pattern, ir)
    if violations:
        logger.error(f"Mapped IR of {run.benchmark.label} is invalid: {violations[0]}")
        raise InvalidIRError(violations)
    program = emit_instructions(ir)
    return CompiledProgram(
        label=run.benchmark.label,
        circuit=circuit,
        pattern=pattern,
        ir=ir,
        program=program,
        metrics=ir_metrics(ir),
        seconds=time.perf_counter() - start,
    )


def write_artifacts(compiled: CompiledProgram, directory: Path) -> None:
    """circuit.txt, pattern.txt, ir.json, program.txt and metrics.json"""
    directory.mkdir(parents=True, exist_ok=True)
    write_text(directory / "circuit.txt", write_circuit(compiled.circuit))
    write_text(directory / "pattern.txt", write_graph_text(compiled.pattern.graph))
    write_text(directory / "ir.json", ir_to_json(compiled.ir) + "\n")
    write_program(compiled.program, directory / "program.txt")
    metrics = compiled.metrics.as_dict()
    metrics["opcode_counts"] = compiled.program.opcode_counts()
    write_json(directory / "metrics.json", metrics)


def trial_key(run: RunConfig) -> str:
    """Digest of everything a trial outcome depends on"""
    return get_cache_key(
        run.model_copy(update={"trials": 1, "workers": 1, "out_dir": Path(".")})
    )


def cmd_compile(run: RunConfig) -> CompiledProgram:
    """Compile the configured benchmark and write its artifacts."""
    directory = Path(run.out_dir) / run.benchmark.label
    logger.info(f"Compiling {run.benchmark.label} onto {run.mapper.vh}")
    compiled = compile_program(run)
    write_artifacts(compiled, directory)
    logger.success(f"Compiled {compiled.label} in {compiled.seconds:.3f}s")
    for name, value in compiled.metrics.as_dict().items():
        logger.success(f"{name}: {value}")
    logger.info(f"Artifacts written to {directory}")
    return compiled


def _online_trial(
    compiled: CompiledProgram, run: RunConfig, directory: Path, trial: int
) -> TrialResult:
    path = directory / f"trial_{trial:03d}.json"
    cached = load_from_cache(path)
    if cached is not None:
        return ExecutionReport.model_validate(cached), None
    engine = OnlineEngine(
        run.hardware, run.renorm, pattern=compiled.pattern, trial=trial
    )
    try:
        report = engine.run(compiled.ir)
    except ExecutionAborted as e:
        logger.warning(f"Trial {trial} of {compiled.label} aborted: {e}")
        assert e.report is not None
        report = e.report
    write_text(path, report.to_json() + "\n")
    write_text(directory / f"events_{trial:03d}.jsonl", events_to_jsonl(engine.events))
    return report, sum(engine.timings)


def _baseline_trial(
    model: DepthModel, run: RunConfig, directory: Path, trial: int
) -> TrialResult:
    path = directory / f"trial_{trial:03d}.json"
    cached = load_from_cache(path)
    if cached is not None:
        return ExecutionReport.model_validate(cached), None
    start = time.perf_counter()
    report = baseline_retry_execute(model, run.hardware, trial)
    write_text(path, report.to_json() + "\n")
    return report, time.perf_counter() - start


def _rsl_postfix(results: List[TrialResult]) -> Dict[str, str]:
    done = [report.rsl_consumed for report, _ in results if report.success]
    mean = sum(done) / len(done) if done else float("nan")
    return {"ok": f"{len(done)}/{len(results)}", "#RSL": f"{mean:.1f}"}


def _finish(
    run: RunConfig,
    compiled: CompiledProgram,
    mode: Literal["online", "baseline"],
    results: List[TrialResult],
    directory: Path,
) -> RunSummary:
    reports = [report for report, _ in results]
    summary = summarize(
        reports,
        mode,
        compiled.label,
        trial_key(run),
        compiled.metrics.logical_layers,
        run.hardware.merge_factor,
    )
    name = "report.json" if mode == "online" else "baseline.json"
    write_text(directory / name, summary.to_json())
    fresh = [seconds for _, seconds in results if seconds is not None]
    rsl_total = sum(r.rsl_consumed for (r, s) in results if s is not None)
    timing = "timing.json" if mode == "online" else "timing_baseline.json"
    write_json(
        directory / timing,
        {
            "compile_seconds": compiled.seconds,
            "trial_seconds": [seconds for _, seconds in results],
            "seconds_per_rsl": sum(fresh) / rsl_total if rsl_total else None,
        },
    )
    logger.success(f"{mode} results for {compiled.label}:")
    logger.success(f"Trials completed: {summary.successes}/{summary.trials}")
    for reason, count in summary.aborts.items():
        logger.success(f"Aborted ({reason}): {count}")
    if summary.rsl.mean is not None:
        logger.success(f"#RSL: {summary.rsl.mean:.2f} ± {summary.rsl.std:.2f}")
        logger.success(
            f"#fusion: {summary.fusions.mean:.2f} ± {summary.fusions.std:.2f}"
        )
    return summary


def cmd_run(run: RunConfig, compiled: Optional[CompiledProgram] = None) -> RunSummary:
    """Compile, then run the online pass once per trial.

    Per-trial reports and event logs land in trials/<digest>/ and are reused
    when the same configuration runs again.
    """
    program = compiled or cmd_compile(run)
    directory = Path(run.out_dir) / program.label
    trials_dir = directory / "trials" / trial_key(run)
    logger.info(
        f"Running {run.trials} trial(s) of {program.label} on "
        f"{run.hardware.rsl_width}x{run.hardware.rsl_height} RSLs at "
        f"p={run.hardware.p_fusion}"
    )
    results = pooled(
        lambda trial: _online_trial(program, run, trials_dir, trial),
        range(run.trials),
        run.workers,
        "Online trials",
        _rsl_postfix,
    )
    return _finish(run, program, "online", results, directory)


def cmd_baseline(
    run: RunConfig, compiled: Optional[CompiledProgram] = None
) -> RunSummary:
    """Repeat-until-success execution of the same program, per trial"""
    program = compiled or cmd_compile(run)
    directory = Path(run.out_dir) / program.label
    trials_dir = directory / "baseline" / trial_key(run)
    model = DepthModel.from_ir(program.ir, run.hardware.merge_factor)
    logger.info(
        f"Baseline over depth {model.depth} with cap {run.hardware.rsl_cap} RSLs"
    )
    results = pooled(
        lambda trial: _baseline_trial(model, run, trials_dir, trial),
        range(run.trials),
        run.workers,
        "Baseline trials",
        _rsl_postfix,
    )
    return _finish(run, program, "baseline", results, directory)


def synthetic_ir(layers: int, vh: VirtualHardwareConfig) -> FlexLatticeIR:
    """Fully occupied program: every site is mapped on every layer and linked
    to the same site one layer up."""
    ir = FlexLatticeIR(vh)
    g = 0
    for layer in range(layers):
        for y in range(vh.height):
            for x in range(vh.width):
                ir.map_node(Coord(x, y, layer), g)
                g += 1
        for y in range(vh.height):
            for x in range(vh.width):
                here = Coord(x, y, layer)
                if x + 1 < vh.width:
                    ir.add_spatial_edge(here, Coord(x + 1, y, layer))
                if y + 1 < vh.height:
                    ir.add_spatial_edge(here, Coord(x, y + 1, layer))
                if layer:
                    ir.add_temporal_edge(Coord(x, y, layer - 1), here)
    return ir


def _point_dir(spec: SweepSpec, value: Any) -> Path:
    return Path(spec.base.out_dir) / f"sweep_{spec.kind}" / f"{spec.parameter}={value}"


def _sweep_runs(spec: SweepSpec) -> List[Dict[str, Any]]:
    rows = []
    for value in spec.values:
        point = override(
            spec.point(value),
            {"trials": spec.trials, "out_dir": str(_point_dir(spec, value))},
        )
        row: Dict[str, Any] = {"value": value, "trials": spec.trials}
        try:
            compiled = cmd_compile(point)
            driver = cmd_run if spec.kind == "run" else cmd_baseline
            summary = driver(point, compiled)
        except BenchError as e:
            logger.warning(f"Sweep point {spec.parameter}={value} failed: {e}")
            row["error"] = str(e)
            rows.append(row)
            continue
        row.update(
            successes=summary.successes,
            mean_rsl=summary.rsl.mean,
            std_rsl=summary.rsl.std,
            mean_fusions=summary.fusions.mean,
            std_fusions=summary.fusions.std,
            logical_layers=summary.logical_layers,
        )
        rows.append(row)
    return rows


@dataclass(frozen=True)
class _LayerSample:
    success: bool
    size: int
    unlimited: int


def _sweep_renorm(spec: SweepSpec) -> List[Dict[str, Any]]:
    points: Dict[int, RunConfig] = {}
    rows: List[Dict[str, Any]] = []
    for index, value in enumerate(spec.values):
        point = spec.point(value)
        hw = point.hardware
        row: Dict[str, Any] = {"value": value, "trials": spec.trials}
        try:
            row["target_width"], row["target_height"] = point.renorm.target(
                hw.rsl_width, hw.rsl_height
            )
        except BenchError as e:
            logger.warning(f"Sweep point {spec.parameter}={value} failed: {e}")
            row["error"] = str(e)
        else:
            points[index] = point
        rows.append(row)

    def sample(item: Tuple[int, int]) -> _LayerSample:
        index, trial = item
        point = points[index]
        hw, rc = point.hardware, point.renorm
        layer, _ = build_merged_layer(hw, layer_rng(hw.seed, trial, 0))
        lattice = carve_lattice(layer, rc)
        width, height = rc.target(hw.rsl_width, hw.rsl_height)
        unlimited = lattice.size
        if rc.module_count > 1:
            unlimited = unlimited_lattice_size(layer, rc.node_size)
        return _LayerSample(
            success=lattice.width >= width and lattice.height >= height,
            size=lattice.size,
            unlimited=unlimited,
        )

    items = [(index, trial) for index in points for trial in range(spec.trials)]
    samples = pooled(sample, items, spec.base.workers, "Renormalizing layers")
    for index in points:
        mine = [s for (i, _), s in zip(items, samples) if i == index]
        sizes = mean_std(s.size for s in mine)
        unlimited = mean_std(s.unlimited for s in mine)
        rows[index].update(
            success_rate=sum(s.success for s in mine) / len(mine),
            mean_size=sizes["mean"],
            std_size=sizes["std"],
            mean_unlimited_size=unlimited["mean"],
            modular_fraction=(
                sizes["mean"] / unlimited["mean"] if unlimited["mean"] else None
            ),
        )
    return rows


def _sweep_ratio(spec: SweepSpec) -> List[Dict[str, Any]]:
    programs: Dict[int, Tuple[RunConfig, FlexLatticeIR]] = {}
    rows: List[Dict[str, Any]] = []
    for index, value in enumerate(spec.values):
        point = spec.point(value)
        hw = point.hardware
        row: Dict[str, Any] = {
            "value": value,
            "trials": spec.trials,
            "logical_layers": spec.ratio_layers,
        }
        try:
            width, height = point.renorm.target(hw.rsl_width, hw.rsl_height)
        except BenchError as e:
            logger.warning(f"Sweep point {spec.parameter}={value} failed: {e}")
            row["error"] = str(e)
        else:
            vh = VirtualHardwareConfig(width=width, height=height)
            programs[index] = (point, synthetic_ir(spec.ratio_layers, vh))
        rows.append(row)

    def realize(item: Tuple[int, int]) -> ExecutionReport:
        index, trial = item
        point, ir = programs[index]
        engine = OnlineEngine(point.hardware, point.renorm, trial=trial)
        try:
            return engine.run(ir)
        except ExecutionAborted as e:
            assert e.report is not None
            return e.report

    items = [(index, trial) for index in programs for trial in range(spec.trials)]
    reports = pooled(realize, items, spec.base.workers, "Long programs")
    for index in programs:
        mine = [r for (i, _), r in zip(items, reports) if i == index]
        done = [r for r in mine if r.success]
        ratios = mean_std(r.rsl_per_logical for r in done)
        rows[index].update(
            successes=len(done),
            mean_ratio=ratios["mean"],
            std_ratio=ratios["std"],
            mean_rsl=mean_std(r.rsl_consumed for r in done)["mean"],
        )
    return rows


SWEEPS: Dict[str, Callable[[SweepSpec], List[Dict[str, Any]]]] = {
    "run": _sweep_runs,
    "baseline": _sweep_runs,
    "renorm": _sweep_renorm,
    "ratio": _sweep_ratio,
}


def sweep_table(spec: SweepSpec, rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Rows in value order with the stable column set of the sweep kind"""
    columns = ["schema_version", "kind", "parameter", "value"]
    columns += SWEEP_COLUMNS[spec.kind] + ["error"]
    df = pd.DataFrame(rows)
    df["schema_version"] = CSV_SCHEMA_VERSION
    df["kind"] = spec.kind
    df["parameter"] = spec.parameter
    return df.reindex(columns=columns)


def sweep_csv_path(spec: SweepSpec) -> Path:
    return Path(spec.base.out_dir) / f"sweep_{spec.kind}_{spec.parameter}.csv"


def cmd_sweep(spec: SweepSpec) -> pd.DataFrame:
    """One CSV row per swept value; failed points keep their row with an error."""
    logger.info(
        f"Sweeping {spec.parameter} over {list(spec.values)} "
        f"({spec.kind}, {spec.trials} trial(s) per point)"
    )
    df = sweep_table(spec, SWEEPS[spec.kind](spec))
    path = sweep_csv_path(spec)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    failed = int(df["error"].notna().sum())
    logger.success(f"Sweep table with {len(df)} row(s) written to {path}")
    if failed:
        logger.warning(f"{failed} sweep point(s) failed, see the error column")
    return df
