# -*- coding: utf-8 -*-
"""Tests for the online pass, the delay ledger and the retry baseline."""

import json
import re
from typing import Any

import numpy as np
import pytest
from pydantic import ValidationError

from src.benchmarks import build_benchmark
from src.errors import (
    ConfigError,
    DelayBudgetExceeded,
    ExecutionAborted,
    RslCapExceeded,
)
from src.frontend import (
    Circuit,
    MeasurementPattern,
    limit_cz_degree,
    translate_circuit,
)
from src.fusion_layer import HardwareConfig, MergedLayer, build_merged_layer
from src.graphstate import Generator, GraphState
from src.ir import (
    Coord,
    FlexLatticeIR,
    InstructionProgram,
    VirtualHardwareConfig,
    emit_instructions,
)
from src.mapper import MapperConfig, map_program
from src.online import (
    Bundle,
    DelayLedger,
    DepthModel,
    OnlineEngine,
    baseline_retry_execute,
    bundle_mask,
    events_to_jsonl,
    execute,
    hardware_preset,
    infer_virtual_hardware,
    layer_rng,
    measurement_plan,
    recount_fusions,
)
from src.renormalization import RenormConfig, RenormalizedLattice, renormalize_2d

SINGLE_SITE = VirtualHardwareConfig(width=1, height=1)


def qaoa_pattern() -> MeasurementPattern:
    return translate_circuit(limit_cz_degree(build_benchmark("qaoa", 4, 0)))


def perfect_hardware(side: int = 4, **overrides: Any) -> HardwareConfig:
    return HardwareConfig(
        rsl_width=side, rsl_height=side, p_fusion=1.0, retry_batches=0, **overrides
    )


def chain_ir() -> FlexLatticeIR:
    """Three nodes on one site, one program layer each"""
    chain = MeasurementPattern(
        graph=GraphState.from_edges(3, [(0, 1), (1, 2)]),
        node_basis={},
        inputs=[],
        outputs=[],
        flow={0: 1, 1: 2},
    )
    return map_program(chain, MapperConfig(vh=SINGLE_SITE))


def stored_ir() -> FlexLatticeIR:
    """Layer 0 to layer 2 on one site through a delay line"""
    ir = FlexLatticeIR(SINGLE_SITE)
    ir.add_ancilla(Coord(0, 0, 0))
    ir.map_node(Coord(0, 0, 2), 0)
    ir.add_temporal_edge(Coord(0, 0, 0), Coord(0, 0, 2))
    return ir


def test_empty_program_consumes_nothing() -> None:
    report = execute(InstructionProgram(), perfect_hardware(), RenormConfig())
    assert report.success
    assert report.rsl_consumed == 0
    assert report.fusions_attempted == 0
    assert report.layer_labels == []


def test_perfect_fusion_realizes_one_layer_per_rsl() -> None:
    ir = chain_ir()
    assert ir.layer_count == 3
    engine = OnlineEngine(perfect_hardware(), RenormConfig(node_size=4))
    report = engine.run(ir)
    assert report.success
    assert report.rsl_consumed == 3
    assert report.logical_layer_indices == [0, 1, 2]
    assert report.routing_layer_count == 0
    assert report.layer_labels == ["1", "2", "3"]
    assert report.rsl_per_logical == 1.0
    # 24 in-plane bonds per RSL, 3 bundle sites arriving on RSLs 1 and 2
    assert [r.temporal_fusions for r in report.renorm_stats] == [0, 3, 3]
    assert report.fusions_attempted == 3 * 24 + 6
    assert report.cycles == 3


def test_connect_time_like_without_pending_demands() -> None:
    cfg, rc = perfect_hardware(), RenormConfig(node_size=4)
    engine = OnlineEngine(cfg, rc)
    layer, _ = build_merged_layer(cfg, layer_rng(cfg.seed, 0, 0))
    # no lattice: the layer only routes
    assert not engine.connect_time_like(None, layer, 0)
    assert engine.realized == 0
    lattice = renormalize_2d(layer, rc, (1, 1))
    assert lattice is not None
    assert engine.connect_time_like(lattice, layer, 0)
    assert engine.realized == 1


def line_bundle(low: int) -> Bundle:
    """Bundle entering the far end of a 3x1 layer, aimed at site (0, 0)"""
    entries = np.array([[False, False, True]])
    return Bundle(((0, 0), low, low + 1), (0, 0), entries.copy(), entries.copy())


def test_connection_follows_a_site_path() -> None:
    engine = OnlineEngine(perfect_hardware(), RenormConfig(node_size=4))
    lattice = RenormalizedLattice.from_lines([[(0, 0)]], [[(0, 0)]])
    engine.active = [line_bundle(0)]
    assert engine.connect_time_like(lattice, MergedLayer.full(3, 1), 0)
    connects = [event for event in engine.events if event["event"] == "connect"]
    assert connects[0]["path"] == [[2, 0], [1, 0], [0, 0]]


def test_bundles_cannot_share_route_sites() -> None:
    engine = OnlineEngine(perfect_hardware(), RenormConfig(node_size=4))
    lattice = RenormalizedLattice.from_lines([[(0, 0)]], [[(0, 0)]])
    # both bundles need (2, 0) and (1, 0) on the only path
    engine.active = [line_bundle(0), line_bundle(1)]
    assert not engine.connect_time_like(lattice, MergedLayer.full(3, 1), 0)
    assert engine.realized == 0
    assert not any(event["event"] == "connect" for event in engine.events)


def test_routing_without_bundles_forwards_nothing() -> None:
    cfg = HardwareConfig(
        rsl_width=4, rsl_height=4, p_fusion=0.05, retry_batches=0, rsl_cap=2
    )
    engine = OnlineEngine(cfg, RenormConfig(node_size=4))
    with pytest.raises(RslCapExceeded) as info:
        engine.run(chain_ir())
    report = info.value.report
    assert report is not None
    records = report.renorm_stats
    assert [record.kind for record in records] == ["routing", "routing"]
    assert [record.temporal_fusions for record in records] == [0, 0]


def test_failed_fusions_adjust_the_measurement_plan() -> None:
    pattern = qaoa_pattern()
    ir = map_program(pattern, MapperConfig(vh=VirtualHardwareConfig()))
    rc = RenormConfig(node_size=4)
    perfect = OnlineEngine(perfect_hardware(16), rc, pattern=pattern).run(ir)
    assert perfect.repair_words == {}

    lossy_cfg = HardwareConfig(rsl_width=16, rsl_height=16, rsl_cap=500)
    reports = []
    for trial in range(3):
        engine = OnlineEngine(lossy_cfg, rc, pattern=pattern, trial=trial)
        try:
            reports.append(engine.run(ir))
        except ExecutionAborted as e:
            assert e.report is not None
            reports.append(e.report)
    assert any(report.repair_words for report in reports)
    words = {w for report in reports for w in report.repair_words.values()}
    assert words <= {"U_Z+", "U_Z-", "U_Z+ U_Z+"}
    assert any(r.measurement_plan != perfect.measurement_plan for r in reports)


def test_program_and_ir_runs_agree() -> None:
    ir = chain_ir()
    cfg, rc = perfect_hardware(), RenormConfig(node_size=4)
    from_program = execute(emit_instructions(ir), cfg, rc)
    assert from_program == OnlineEngine(cfg, rc).run(ir)
    assert infer_virtual_hardware(emit_instructions(ir)) == SINGLE_SITE


def test_event_log_recount_matches_report() -> None:
    engine = OnlineEngine(perfect_hardware(), RenormConfig(node_size=4))
    report = engine.run(chain_ir())
    text = events_to_jsonl(engine.events)
    assert recount_fusions(text.splitlines()) == report.fusions_attempted
    events = [json.loads(line)["event"] for line in text.splitlines()]
    assert events == ["rsl", "connect", "rsl", "connect", "rsl"]
    assert len(engine.timings) == 3


def test_delay_line_duration_in_cycles() -> None:
    cfg = perfect_hardware(resource_state_size=5)
    assert cfg.merge_factor == 2
    engine = OnlineEngine(cfg, RenormConfig(node_size=4))
    report = engine.run(stored_ir())
    assert report.success
    assert report.ledger_durations == [4]
    assert report.delay_peak_cycles == 4
    assert report.cycles == 6
    events = [event["event"] for event in engine.events]
    assert events == ["store", "rsl", "retrieve", "rsl", "connect", "close", "rsl"]


def test_delay_budget_aborts_with_report() -> None:
    cfg = perfect_hardware(resource_state_size=5, photon_lifetime_cycles=3)
    engine = OnlineEngine(cfg, RenormConfig(node_size=4))
    with pytest.raises(DelayBudgetExceeded) as info:
        engine.run(stored_ir())
    report = info.value.report
    assert report is not None
    assert not report.success
    assert report.abort_reason == "delay-budget"
    assert report.rsl_consumed == 2


def test_rsl_cap_aborts_with_report() -> None:
    engine = OnlineEngine(perfect_hardware(rsl_cap=2), RenormConfig(node_size=4))
    with pytest.raises(RslCapExceeded) as info:
        engine.run(chain_ir())
    assert info.value.report.abort_reason == "rsl-cap"
    assert info.value.report.rsl_consumed == 2


def test_virtual_hardware_must_fit_the_renormalized_size() -> None:
    ir = FlexLatticeIR(VirtualHardwareConfig(width=2, height=2))
    ir.map_node(Coord(1, 1, 0), 0)
    with pytest.raises(ConfigError, match="exceeds the renormalized size"):
        OnlineEngine(perfect_hardware(), RenormConfig(node_size=4)).run(ir)


def test_ledger_arithmetic() -> None:
    ledger = DelayLedger(lifetime=10)
    edge = ((0, 0), 0, 3)
    ledger.store(edge, 2)
    ledger.check(12)
    with pytest.raises(DelayBudgetExceeded):
        ledger.check(13)
    assert ledger.close(edge, 12) == 10
    assert ledger.peak == 10
    ledger.store(edge, 0)
    with pytest.raises(DelayBudgetExceeded, match="stored 11 cycles"):
        ledger.close(edge, 11)


def test_reports_are_byte_identical_for_a_seed() -> None:
    pattern = qaoa_pattern()
    ir = map_program(pattern, MapperConfig(vh=VirtualHardwareConfig()))
    cfg = HardwareConfig(rsl_width=8, rsl_height=8, p_fusion=0.75, seed=3)
    rc = RenormConfig(node_size=4)
    first = OnlineEngine(cfg, rc, pattern=pattern)
    second = OnlineEngine(cfg, rc, pattern=pattern)
    report = first.run(ir)
    assert report.to_json() == second.run(ir).to_json()
    assert events_to_jsonl(first.events) == events_to_jsonl(second.events)
    assert report.success
    assert len(report.layer_labels) == report.rsl_consumed
    assert len(report.logical_layer_indices) == ir.layer_count
    routing = [label for label in report.layer_labels if "." in label]
    assert len(routing) == report.routing_layer_count
    assert all(re.fullmatch(r"\d+(\.\d+)?", label) for label in report.layer_labels)
    assert report.rsl_consumed == ir.layer_count + report.routing_layer_count


def test_other_trials_use_other_streams() -> None:
    pattern = qaoa_pattern()
    ir = map_program(pattern, MapperConfig(vh=VirtualHardwareConfig()))
    cfg = HardwareConfig(rsl_width=8, rsl_height=8, p_fusion=0.75)
    rc = RenormConfig(node_size=4)
    bonds = []
    for trial in (0, 1):
        engine = OnlineEngine(cfg, rc, trial=trial)
        engine.run(ir)
        bonds.append([e["bonds"] for e in engine.events if e["event"] == "rsl"])
    assert bonds[0] != bonds[1]


def test_bundle_mask_clips_to_the_layer() -> None:
    corner = bundle_mask((0, 0), (4, 4), 5)
    assert corner.sum() == 3
    assert bundle_mask((1, 1), (4, 4), 5).sum() == 5
    assert bundle_mask((1, 1), (4, 4), 2).tolist()[0][1]
    assert bundle_mask((1, 1), (4, 4), 1).sum() == 1


def test_measurement_plan_labels() -> None:
    pattern = translate_circuit(Circuit(1).j(0, 0.0))
    ir = map_program(pattern, MapperConfig(vh=SINGLE_SITE))
    plan, unused = measurement_plan(ir, pattern)
    assert plan == {"(0, 0, 0)": "+X", "(0, 0, 1)": "output"}
    assert unused == 0
    rotated, _ = measurement_plan(ir, pattern, {0: (Generator.Z_PLUS,)})
    assert rotated["(0, 0, 0)"] in {"+Y", "-Y"}
    bare, _ = measurement_plan(ir)
    assert bare == {"(0, 0, 0)": "g0", "(0, 0, 1)": "g1"}


def test_measurement_plan_for_ancilla_components() -> None:
    ir = FlexLatticeIR(VirtualHardwareConfig(width=2, height=2))
    ir.add_ancilla(Coord(0, 0, 0))
    ir.add_ancilla(Coord(1, 0, 0))
    ir.add_spatial_edge(Coord(0, 0, 0), Coord(1, 0, 0))
    ir.add_ancilla(Coord(0, 1, 0))
    plan, unused = measurement_plan(ir)
    assert plan == {"(0, 0, 0)": "+X", "(1, 0, 0)": "+X", "(0, 1, 0)": "+Y"}
    assert unused == 1


def test_hardware_presets() -> None:
    cfg, rc = hardware_preset(0.9, 2)
    assert (cfg.rsl_width, cfg.rsl_height) == (24, 24)
    assert rc.node_size == 12
    assert rc.target(24, 24) == (2, 2)
    cfg, rc = hardware_preset(0.75, 5, seed=9)
    assert cfg.rsl_width == 120 and cfg.seed == 9
    assert rc.node_size == 24
    with pytest.raises(ConfigError, match="no sizing preset"):
        hardware_preset(0.5, 2)


def test_depth_model_from_ir() -> None:
    model = DepthModel.from_ir(chain_ir())
    assert model.layer_fusions == [1, 1, 1]
    assert model.link_fusions == [0, 1, 1]
    assert model.depth == 3
    with pytest.raises(ValidationError):
        DepthModel(layer_fusions=[1, 2], link_fusions=[0])


def test_baseline_with_perfect_fusion() -> None:
    model = DepthModel(layer_fusions=[3, 3], link_fusions=[0, 2])
    report = baseline_retry_execute(model, perfect_hardware())
    assert report.success
    assert report.rsl_consumed == 2
    assert report.fusions_attempted == 3 + 3 + 2


def test_baseline_stops_at_the_cap() -> None:
    model = DepthModel(layer_fusions=[20], link_fusions=[0])
    cfg = HardwareConfig(p_fusion=0.5, rsl_cap=3)
    report = baseline_retry_execute(model, cfg)
    assert not report.success
    assert report.abort_reason == "rsl-cap"
    assert report.rsl_consumed == 3
    assert report.fusions_attempted == 60

