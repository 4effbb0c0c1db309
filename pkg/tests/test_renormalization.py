# -*- coding: utf-8 -*-
"""Tests for 2D renormalization of merged layers."""

import inspect

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import ConfigError
from src.fusion_layer import HardwareConfig, MergedLayer, build_merged_layer
from src.renormalization import (
    DisjointSet,
    ModuleLayout,
    RenormConfig,
    SiteGrid,
    carve_lattice,
    carve_module,
    connected_borders,
    lattice_violations,
    renormalize_2d,
    shortest_path,
    unlimited_lattice_size,
)


def empty_layer(width: int, height: int) -> MergedLayer:
    layer = MergedLayer.full(width, height)
    layer.h_bonds[:] = False
    layer.v_bonds[:] = False
    return layer


def test_disjoint_set() -> None:
    ds = DisjointSet()
    ds.union(1, 2)
    ds.union(3, 4)
    assert ds.connected(1, 2)
    assert not ds.connected(2, 3)
    ds.union(2, 4)
    assert ds.connected(1, 3)
    assert ds.find(5) == 5
    assert not ds.connected(5, 1)


@pytest.mark.parametrize(
    "member",
    [
        DisjointSet.add,
        DisjointSet.find,
        DisjointSet.union,
        DisjointSet.connected,
        ModuleLayout,
        ModuleLayout.modules,
        ModuleLayout.bands,
        ModuleLayout.capacity,
    ],
)
def test_layout_helpers_are_documented(member: object) -> None:
    assert inspect.getdoc(member)


def test_full_layer_gives_exact_lattice() -> None:
    layer = MergedLayer.full(12, 12)
    lattice = renormalize_2d(layer, RenormConfig(node_size=4))
    assert lattice is not None
    assert (lattice.width, lattice.height) == (3, 3)
    assert [path[0][0] for path in lattice.vertical_paths] == [0, 4, 8]
    assert [path[0][1] for path in lattice.horizontal_paths] == [0, 4, 8]
    assert lattice.rep[(1, 2)] == (4, 8)
    assert lattice.regions[(2, 0)] == ((8, 0),)
    assert lattice_violations(lattice, layer) == []


def test_edge_paths_follow_the_lines() -> None:
    lattice = renormalize_2d(MergedLayer.full(12, 12), RenormConfig(node_size=4))
    assert lattice is not None
    assert lattice.edge_path((0, 0), (0, 1)) == [(0, y) for y in range(5)]
    assert lattice.edge_path((1, 0), (0, 0)) == [(x, 0) for x in range(5)]
    assert len(lattice.edges()) == 12
    with pytest.raises(ValueError):
        lattice.edge_path((0, 0), (1, 1))


def test_smaller_target_truncates() -> None:
    lattice = renormalize_2d(MergedLayer.full(12, 12), RenormConfig(), target=(2, 1))
    assert lattice is not None
    assert (lattice.width, lattice.height) == (2, 1)
    assert set(lattice.rep) == {(0, 0), (1, 0)}


def test_bondless_layer_fails() -> None:
    layer = empty_layer(8, 8)
    assert renormalize_2d(layer, RenormConfig()) is None
    assert carve_lattice(layer, RenormConfig()).size == 0
    assert unlimited_lattice_size(MergedLayer.full(12, 12), 4) == 9


def test_sparse_layer_misses_the_target() -> None:
    cfg = HardwareConfig(rsl_width=16, rsl_height=16, p_fusion=0.2, retry_batches=0)
    layer, _ = build_merged_layer(cfg, np.random.default_rng(0))
    assert renormalize_2d(layer, RenormConfig(node_size=4)) is None


def test_cut_layer_stops_early_when_target_is_required() -> None:
    layer = MergedLayer.full(12, 12)
    layer.v_bonds[5, :] = False
    rc = RenormConfig(node_size=4)
    module = rc.layout(12, 12).modules[0]
    grid = SiteGrid(layer)
    exhaustive = carve_module(grid, module, 4)
    assert exhaustive.vertical == [None, None, None]
    assert all(path is not None for path in exhaustive.horizontal)
    early = carve_module(grid, module, 4, required=(3, 3))
    assert early.vertical == [None]
    assert len(early.horizontal) == 1
    assert renormalize_2d(layer, rc) is None


def test_module_grid_and_layout() -> None:
    assert RenormConfig(module_count=1).module_grid() == (1, 1)
    assert RenormConfig(module_count=4).module_grid() == (2, 2)
    assert RenormConfig(module_count=6).module_grid() == (3, 2)
    assert RenormConfig(module_count=5).module_grid() == (5, 1)
    layout = RenormConfig(module_count=4).layout(48, 48)
    assert layout.x_spans == [(0, 22), (25, 47)]
    assert layout.capacity == (10, 10)
    assert len(layout.modules) == 4
    with pytest.raises(ConfigError, match="below node size"):
        RenormConfig(module_count=4).layout(8, 8)
    with pytest.raises(ValidationError):
        RenormConfig(node_size=1)


def test_modular_lattice_is_stitched() -> None:
    layer = MergedLayer.full(48, 48)
    lattice = renormalize_2d(layer, RenormConfig(module_count=4))
    assert lattice is not None
    assert (lattice.width, lattice.height) == (10, 10)
    assert lattice.vertical_paths[0][0] == (0, 0)
    assert lattice.vertical_paths[0][-1] == (0, 46)
    assert lattice_violations(lattice, layer) == []


def test_module_workers_do_not_change_the_result() -> None:
    cfg = HardwareConfig(rsl_width=24, rsl_height=24, p_fusion=0.9)
    layer, _ = build_merged_layer(cfg, np.random.default_rng(7))
    rc = RenormConfig(node_size=2, module_count=4)
    serial = carve_lattice(layer, rc, workers=1)
    threaded = carve_lattice(layer, rc, workers=4)
    assert serial.vertical_paths == threaded.vertical_paths
    assert serial.horizontal_paths == threaded.horizontal_paths
    assert lattice_violations(serial, layer) == []


def test_violations_report_missing_bonds() -> None:
    layer = MergedLayer.full(12, 12)
    lattice = renormalize_2d(layer, RenormConfig(node_size=4))
    assert lattice is not None
    layer.v_bonds[2, 0] = False
    problems = lattice_violations(lattice, layer)
    assert problems == ["vertical path 0 uses missing bond (0, 2)-(0, 3)"]


def test_border_check_and_search() -> None:
    grid = SiteGrid(MergedLayer.full(3, 2))
    assert connected_borders(grid, {0, 1, 2}, [0], [2])
    assert not connected_borders(grid, {0, 2}, [0], [2])
    assert shortest_path(grid, {0, 1, 2, 3, 4, 5}, [0], {2}) == [0, 1, 2]
    assert shortest_path(grid, {0, 3, 4, 5, 2}, [0], {2}) == [0, 3, 4, 5, 2]
    assert shortest_path(grid, {0, 2}, [0], {2}) is None
