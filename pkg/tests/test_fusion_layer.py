# -*- coding: utf-8 -*-
"""Tests for the hardware model and merged-layer sampling."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import ConfigError
from src.fusion_layer import (
    Z_TURN_WORDS,
    HardwareConfig,
    MergedLayer,
    build_merged_layer,
    merge_factor,
)
from src.graphstate import PAULI_Z_WORD, Generator


@pytest.mark.parametrize(
    "size, degree, expected", [(5, 7, 2), (7, 6, 1), (4, 6, 3), (3, 2, 1), (3, 4, 3)]
)
def test_merge_factor(size: int, degree: int, expected: int) -> None:
    assert merge_factor(size, degree) == expected


def test_merge_factor_rejects_unreachable_degree() -> None:
    with pytest.raises(ConfigError):
        merge_factor(2, 3)
    with pytest.raises(ConfigError):
        merge_factor(1, 1)
    assert merge_factor(2, 1) == 1


def test_hardware_config_defaults_and_validation() -> None:
    cfg = HardwareConfig()
    assert cfg.merge_factor == 1
    assert cfg.site_degree == 6
    assert cfg.p_eff == pytest.approx(0.75)
    lossy = HardwareConfig(p_fusion=0.8, p_loss=0.5)
    assert lossy.p_eff == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        HardwareConfig(resource_state_size=2)
    with pytest.raises(ValidationError):
        HardwareConfig(p_fusion=0.0)
    with pytest.raises(ValidationError):
        HardwareConfig(bundle_size=6)
    with pytest.raises(ValidationError):
        HardwareConfig(colour="blue")  # type: ignore[call-arg]


def test_perfect_fusion_bonds_every_pair() -> None:
    cfg = HardwareConfig(rsl_width=6, rsl_height=5, p_fusion=1.0, retry_batches=0)
    layer, fusions = build_merged_layer(cfg, np.random.default_rng(0))
    assert layer.h_bonds.shape == (5, 5)
    assert layer.v_bonds.shape == (4, 6)
    assert layer.h_bonds.all() and layer.v_bonds.all()
    assert layer.bond_count == layer.pair_count == 2 * 30 - 6 - 5
    assert layer.merge_fusions == 0
    assert fusions == layer.pair_count


def test_merges_are_counted_per_site() -> None:
    cfg = HardwareConfig(
        rsl_width=12,
        rsl_height=12,
        resource_state_size=5,
        p_fusion=1.0,
        retry_batches=0,
    )
    assert cfg.merge_factor == 2
    layer, fusions = build_merged_layer(cfg, np.random.default_rng(0))
    assert layer.merge_fusions == 144
    assert fusions == 144 + 264
    assert layer.bond_count == 264


def sparse_layer(retry_batches: int) -> MergedLayer:
    cfg = HardwareConfig(
        rsl_width=20,
        rsl_height=20,
        resource_state_size=9,
        p_fusion=0.5,
        retry_batches=retry_batches,
    )
    layer, _ = build_merged_layer(cfg, np.random.default_rng(5))
    return layer


def test_retry_batches_only_add_bonds() -> None:
    single, retried = sparse_layer(0), sparse_layer(2)
    assert (retried.h_bonds >= single.h_bonds).all()
    assert (retried.v_bonds >= single.v_bonds).all()
    assert retried.bond_count > single.bond_count
    assert retried.bond_fusions > single.bond_fusions


def test_spare_degree_limits_attempts() -> None:
    # s = 4, d = 3: degree 3 and one spare degree per site
    cfg = HardwareConfig(
        rsl_width=4,
        rsl_height=4,
        resource_state_size=4,
        required_degree=3,
        p_fusion=1.0,
    )
    layer, _ = build_merged_layer(cfg, np.random.default_rng(0))
    per_site = np.zeros((4, 4), dtype=int)
    per_site[:, :-1] += layer.h_bonds
    per_site[:, 1:] += layer.h_bonds
    per_site[:-1, :] += layer.v_bonds
    per_site[1:, :] += layer.v_bonds
    assert per_site.max() <= 1
    assert (layer.spare >= 0).all()


def test_sampling_is_seeded() -> None:
    cfg = HardwareConfig(rsl_width=10, rsl_height=10)
    a, _ = build_merged_layer(cfg, np.random.default_rng(42))
    b, _ = build_merged_layer(cfg, np.random.default_rng(42))
    assert np.array_equal(a.h_bonds, b.h_bonds)
    assert np.array_equal(a.v_bonds, b.v_bonds)


def test_merged_layer_neighbors() -> None:
    layer = MergedLayer.full(3, 3)
    assert list(layer.neighbors(1, 1)) == [(1, 0), (2, 1), (1, 2), (0, 1)]
    layer.h_bonds[1, 1] = False
    assert not layer.bonded((1, 1), (2, 1))
    assert layer.bonded((1, 1), (1, 0))
    assert not layer.bonded((0, 0), (1, 1))
    assert layer.adjacency()[1][1] == [1, 7, 3]


def test_perfect_fusion_leaves_no_repair_words() -> None:
    cfg = HardwareConfig(
        rsl_width=8, rsl_height=8, resource_state_size=5, p_fusion=1.0
    )
    layer, _ = build_merged_layer(cfg, np.random.default_rng(3))
    assert layer.byproducts() == {}
    assert layer.byproduct((2, 2)) == ()


def test_failed_merges_leave_quarter_turns() -> None:
    cfg = HardwareConfig(
        rsl_width=12, rsl_height=12, resource_state_size=5, p_fusion=0.5
    )
    layer, _ = build_merged_layer(cfg, np.random.default_rng(8))
    words = layer.byproducts()
    assert words
    assert set(words.values()) <= set(Z_TURN_WORDS.values()) - {()}
    # odd turn counts only come from failed merges
    assert any(len(word) == 1 for word in words.values())


def test_repair_words_follow_the_turn_count() -> None:
    layer = MergedLayer.full(2, 1)
    assert layer.z_turns is not None
    layer.z_turns[0, 0] = -1
    layer.z_turns[0, 1] = 6
    assert layer.byproduct((0, 0)) == (Generator.Z_MINUS,)
    assert layer.byproduct((1, 0)) == PAULI_Z_WORD
    assert layer.byproducts() == {(0, 0): (Generator.Z_MINUS,), (1, 0): PAULI_Z_WORD}
