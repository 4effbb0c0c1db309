# -*- coding: utf-8 -*-
"""Tests for the offline mapper and its placement strategies."""

from typing import Dict, List, Optional, Tuple

import networkx as nx
import pytest
from pydantic import ValidationError

from src.benchmarks import build_benchmark
from src.errors import (
    ConfigError,
    MappingError,
    OccupancyDeadlockError,
    UnroutableEdgeError,
)
from src.frontend import MeasurementPattern, limit_cz_degree, translate_circuit
from src.graphstate import GraphState
from src.ir import (
    Coord,
    FlexLatticeIR,
    VirtualHardwareConfig,
    contract_ancillas,
    emit_instructions,
    ir_to_json,
)
from src.mapper import (
    Mapper,
    MapperConfig,
    MappingState,
    check_semantics,
    ir_metrics,
    map_program,
    refresh,
)
from src.placement_factory import PlacementFactory


def graph_pattern(
    n: int, edges: List[Tuple[int, int]], flow: Optional[Dict[int, int]] = None
) -> MeasurementPattern:
    """Pattern over a bare graph; flow only orders placement"""
    return MeasurementPattern(
        graph=GraphState.from_edges(n, edges),
        node_basis={},
        inputs=[],
        outputs=[],
        flow=dict(flow or {}),
    )


def benchmark_pattern(name: str, n: int, seed: int = 0) -> MeasurementPattern:
    return translate_circuit(limit_cz_degree(build_benchmark(name, n, seed)))


def mapper_config(width: int, height: int, **kwargs: object) -> MapperConfig:
    vh = VirtualHardwareConfig(width=width, height=height)
    return MapperConfig(vh=vh, **kwargs)  # type: ignore[arg-type]


def test_single_node() -> None:
    ir = map_program(graph_pattern(1, []), mapper_config(2, 2))
    metrics = ir_metrics(ir)
    assert metrics.logical_layers == 1
    assert metrics.mapped_nodes == 1
    assert metrics.spatial_edges == metrics.temporal_edges == 0


def test_empty_pattern_gives_empty_ir() -> None:
    ir = map_program(graph_pattern(0, []), mapper_config(2, 2))
    assert ir_metrics(ir).as_dict() == {
        "logical_layers": 0,
        "mapped_nodes": 0,
        "ancilla_nodes": 0,
        "spatial_edges": 0,
        "temporal_edges": 0,
        "stored_node_layer_spans": (),
    }


@pytest.mark.parametrize("placement", ["locality", "row_major"])
def test_cycle_on_two_by_two(placement: str) -> None:
    cycle = nx.cycle_graph(4)
    pattern = graph_pattern(4, list(cycle.edges))
    ir = map_program(pattern, mapper_config(2, 2, placement=placement))
    assert 2 <= ir.layer_count <= 3
    contraction = contract_ancillas(ir)
    assert contraction.ok
    assert nx.is_isomorphic(contraction.graph, cycle)
    assert sorted(contraction.graph.edges) == sorted(cycle.edges)


def test_cycle_metrics_match_instruction_recount() -> None:
    cycle = graph_pattern(4, list(nx.cycle_graph(4).edges))
    ir = map_program(cycle, mapper_config(2, 2))
    metrics = ir_metrics(ir)
    counts = emit_instructions(ir).opcode_counts()
    assert counts.get("enable_spatial_v_edge", 0) == metrics.spatial_edges
    assert counts.get("enable_temporal_v_edge", 0) == metrics.temporal_edges
    assert counts.get("map_v_node", 0) == metrics.mapped_nodes == 4
    assert counts.get("make_v_node_ancilla", 0) == metrics.ancilla_nodes
    assert counts.get("store_v_node", 0) == len(metrics.stored_node_layer_spans)


def test_stored_edge_metrics() -> None:
    ir = FlexLatticeIR(VirtualHardwareConfig())
    ir.add_ancilla(Coord(1, 1, 0))
    ir.map_node(Coord(1, 1, 2), 0)
    ir.add_temporal_edge(Coord(1, 1, 0), Coord(1, 1, 2))
    metrics = ir_metrics(ir)
    assert metrics.logical_layers == 3
    assert metrics.temporal_edges == 1
    assert metrics.stored_node_layer_spans == (2,)


@pytest.mark.parametrize("size", [2, 3])
def test_qaoa_four_maps_faithfully(size: int) -> None:
    pattern = benchmark_pattern("qaoa", 4)
    cfg = mapper_config(size, size)
    mapper = Mapper(pattern, cfg)
    ir = mapper.run()
    assert check_semantics(pattern, ir) == []
    assert ir.layer_count > 0
    order = list(mapper.state.placed)
    position = {node: i for i, node in enumerate(order)}
    for u, v in pattern.flow.items():
        assert position[u] < position[v]
    assert all(count <= cfg.cap_count for _, count in mapper.state.occupancy_log)


def test_mapping_is_deterministic() -> None:
    pattern = benchmark_pattern("vqe", 4, seed=1)
    cfg = mapper_config(3, 3)
    first = ir_to_json(map_program(pattern, cfg))
    assert ir_to_json(map_program(pattern, cfg)) == first


def test_refresh_without_stored_nodes_only_advances() -> None:
    state = MappingState(FlexLatticeIR(VirtualHardwareConfig()))
    state = refresh(state)
    assert state.layer == 1
    assert state.refreshes == 1
    assert state.ir.nodes == {}
    assert state.stored == {}


@pytest.mark.parametrize("interval", [1, 3])
def test_refresh_keeps_mapping_faithful(interval: int) -> None:
    pattern = benchmark_pattern("qaoa", 4)
    mapper = Mapper(pattern, mapper_config(3, 3, refresh_interval_layers=interval))
    ir = mapper.run()
    assert check_semantics(pattern, ir) == []
    assert mapper.state.refreshes >= 1


def test_cap_count_floor() -> None:
    assert mapper_config(2, 2).cap_count == 1
    assert mapper_config(5, 5).cap_count == 6
    assert mapper_config(2, 2, occupancy_cap=1.0).cap_count == 4
    assert mapper_config(4, 4).budget == 8


def test_config_rejects_bad_values() -> None:
    with pytest.raises(ValidationError):
        mapper_config(2, 2, occupancy_cap=0.0)
    with pytest.raises(ValidationError, match="unknown placement"):
        mapper_config(2, 2, placement="annealing")
    with pytest.raises(ConfigError, match="unknown placement"):
        PlacementFactory.create_strategy("annealing")


def test_single_site_layer_deadlocks() -> None:
    triangle = graph_pattern(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(OccupancyDeadlockError) as info:
        map_program(triangle, mapper_config(1, 1, max_stalled_layers=2))
    assert isinstance(info.value, MappingError)
    assert info.value.layer >= 1


def test_too_many_neighbors_is_unroutable() -> None:
    star = graph_pattern(3, [(0, 2), (1, 2)], flow={0: 2, 1: 2})
    with pytest.raises(UnroutableEdgeError) as info:
        map_program(star, mapper_config(1, 1, max_stalled_layers=3))
    assert info.value.edge == (1, 2)


def test_chain_on_single_site_uses_temporal_edges() -> None:
    chain = graph_pattern(3, [(0, 1), (1, 2)], flow={0: 1, 1: 2})
    ir = map_program(chain, mapper_config(1, 1))
    assert ir.layer_count == 3
    assert ir_metrics(ir).temporal_edges == 2
    assert check_semantics(chain, ir) == []
