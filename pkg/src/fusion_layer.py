# -*- coding: utf-8 -*-
"""Hardware model and the sampling of one merged resource-state layer.

Every lattice site is a cluster of merged resource states. In-plane bonds
between 4-adjacent sites are leaf-leaf fusions, each an independent
Bernoulli(p_eff) event. Fusions are issued in four conflict-free batches
(even/odd horizontal, even/odd vertical) so that no site spends two degrees
in one batch, which keeps the sampling vectorized.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import ConfigError
from src.graphstate import PAULI_Z_WORD, ByproductWord, Generator

IN_PLANE_DEGREE = 4
TEMPORAL_DEGREE = 2
DEFAULT_RSL_CAP = 10**6

# net Z quarter turns mod 4 -> pending word on the site root
Z_TURN_WORDS: Dict[int, ByproductWord] = {
    0: (),
    1: (Generator.Z_PLUS,),
    2: PAULI_Z_WORD,
    3: (Generator.Z_MINUS,),
}


def merge_factor(resource_state_size: int, required_degree: int) -> int:
    """Smallest m with (s - 1) + (m - 1)(s - 2) >= d.

    Raises:
        ConfigError: If a star of size s cannot reach the degree
    """
    s, d = resource_state_size, required_degree
    if s < 2 or d < 1:
        raise ConfigError(f"merge_factor needs s >= 2 and d >= 1, got s={s}, d={d}")
    if s - 1 >= d:
        return 1
    if s == 2:
        raise ConfigError(f"2-qubit resource states cannot reach degree {d}")
    return 1 + math.ceil((d - (s - 1)) / (s - 2))


class HardwareConfig(BaseModel):
    """Photonic hardware: RSL geometry, resource states and fusion model"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rsl_width: int = Field(24, ge=1)
    rsl_height: int = Field(24, ge=1)
    resource_state_size: int = Field(7, ge=2)
    p_fusion: float = Field(0.75, gt=0.0, le=1.0)
    p_loss: float = Field(0.0, ge=0.0, lt=1.0)
    retry_batches: int = Field(1, ge=0)
    photon_lifetime_cycles: int = Field(5000, gt=0)
    required_degree: int = Field(IN_PLANE_DEGREE + TEMPORAL_DEGREE, ge=1)
    bundle_size: int = Field(5, ge=1, le=5)
    rsl_cap: int = Field(DEFAULT_RSL_CAP, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _reachable_degree(self) -> "HardwareConfig":
        merge_factor(self.resource_state_size, self.required_degree)
        return self

    @property
    def p_eff(self) -> float:
        """Fusion success with both photons detected"""
        return self.p_fusion * (1.0 - self.p_loss) ** 2

    @property
    def merge_factor(self) -> int:
        """Resource states merged per site, also RSG cycles per RSL"""
        return merge_factor(self.resource_state_size, self.required_degree)

    @property
    def site_degree(self) -> int:
        """Degree of a fully merged site"""
        s, m = self.resource_state_size, self.merge_factor
        return (s - 1) + (m - 1) * (s - 2)


@dataclass
class MergedLayer:
    """Site-level bond graph of one RSL.

    h_bonds[y, x] joins (x, y) and (x + 1, y); v_bonds[y, x] joins (x, y)
    and (x, y + 1). z_turns[y, x] is the net number of Z quarter turns left on
    the site root by failure repairs, mod 4.
    """

    width: int
    height: int
    h_bonds: np.ndarray
    v_bonds: np.ndarray
    spare: np.ndarray
    merge_fusions: int = 0
    bond_fusions: int = 0
    z_turns: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.z_turns is None:
            self.z_turns = np.zeros((self.height, self.width), dtype=np.int64)

    def byproduct(self, site: Tuple[int, int]) -> ByproductWord:
        """Pending repair word on the root of site (x, y)"""
        assert self.z_turns is not None
        x, y = site
        return Z_TURN_WORDS[int(self.z_turns[y, x]) % 4]

    def byproducts(self) -> Dict[Tuple[int, int], ByproductWord]:
        """Every site carrying a non-trivial repair word"""
        assert self.z_turns is not None
        ys, xs = np.nonzero(self.z_turns % 4)
        return {(int(x), int(y)): self.byproduct((x, y)) for y, x in zip(ys, xs)}

    @classmethod
    def full(cls, width: int, height: int) -> "MergedLayer":
        """Every in-plane bond present, no fusion accounted"""
        return cls(
            width,
            height,
            np.ones((height, width - 1), dtype=bool),
            np.ones((height - 1, width), dtype=bool),
            np.zeros((height, width), dtype=np.int64),
        )

    @property
    def fusions(self) -> int:
        """Merge and bond fusions attempted on this layer"""
        return self.merge_fusions + self.bond_fusions

    @property
    def bond_count(self) -> int:
        """In-plane bonds present"""
        return int(self.h_bonds.sum() + self.v_bonds.sum())

    @property
    def pair_count(self) -> int:
        """Adjacent site pairs, 2WH - W - H"""
        return 2 * self.width * self.height - self.width - self.height

    def bonded(self, a: Tuple[int, int], b: Tuple[int, int]) -> bool:
        """Bond between two 4-adjacent sites"""
        (x1, y1), (x2, y2) = sorted((a, b))
        if y1 == y2 and x2 == x1 + 1:
            return bool(self.h_bonds[y1, x1])
        if x1 == x2 and y2 == y1 + 1:
            return bool(self.v_bonds[y1, x1])
        return False

    def neighbors(self, x: int, y: int) -> Iterator[Tuple[int, int]]:
        """Bonded neighbors in (up, right, down, left) order"""
        if y > 0 and self.v_bonds[y - 1, x]:
            yield (x, y - 1)
        if x < self.width - 1 and self.h_bonds[y, x]:
            yield (x + 1, y)
        if y < self.height - 1 and self.v_bonds[y, x]:
            yield (x, y + 1)
        if x > 0 and self.h_bonds[y, x - 1]:
            yield (x - 1, y)

    def adjacency(self) -> List[List[List[int]]]:
        """Per-site list of bonded neighbor indices (y * width + x)"""
        w = self.width
        out: List[List[List[int]]] = []
        for y in range(self.height):
            row = []
            for x in range(w):
                row.append([ny * w + nx for nx, ny in self.neighbors(x, y)])
            out.append(row)
        return out


def _batches(width: int, height: int) -> Iterator[Tuple[str, slice, slice, slice]]:
    """Conflict-free fusion batches: (orientation, bond slice, two site slices)"""
    for orientation, size in (("h", width), ("v", height)):
        for parity in (0, 1):
            lower = slice(parity, size - 1, 2)
            yield orientation, lower, lower, slice(parity + 1, size, 2)


def _fuse(
    layer: MergedLayer, rng: np.random.Generator, p_eff: float, retry: bool
) -> None:
    """One round over every adjacent pair; retry rounds only touch failed bonds.

    A failed leaf-leaf fusion Z-removes both leaves; outcome 1 leaves a Pauli Z
    on that side's root.
    """
    assert layer.z_turns is not None
    for orientation, bonds, first, second in _batches(layer.width, layer.height):
        if orientation == "h":
            present = layer.h_bonds[:, bonds]
            spare_a = layer.spare[:, first]
            spare_b = layer.spare[:, second]
            turns_a = layer.z_turns[:, first]
            turns_b = layer.z_turns[:, second]
        else:
            present = layer.v_bonds[bonds, :]
            spare_a = layer.spare[first, :]
            spare_b = layer.spare[second, :]
            turns_a = layer.z_turns[first, :]
            turns_b = layer.z_turns[second, :]
        attempt = (spare_a > 0) & (spare_b > 0)
        if retry:
            attempt &= ~present
        spare_a -= attempt
        spare_b -= attempt
        fused = attempt & (rng.random(attempt.shape) < p_eff)
        present |= fused
        failed = attempt & ~fused
        outcomes = rng.integers(0, 2, size=(2,) + attempt.shape)
        turns_a += 2 * (failed & (outcomes[0] == 1))
        turns_b += 2 * (failed & (outcomes[1] == 1))
        layer.bond_fusions += int(attempt.sum())


def build_merged_layer(
    cfg: HardwareConfig, rng: np.random.Generator
) -> Tuple[MergedLayer, int]:
    """Sample one RSL: root-leaf merges, in-plane bonds, then retry batches.

    A failed root-leaf merge is repaired by local complementation and the site
    loses one degree instead of gaining s - 2. The root is a former neighbor of
    the Y-removed qubit, so each repair leaves U_Z- (outcome 0) or U_Z+
    (outcome 1) on it. The repair words are read back with
    `MergedLayer.byproduct`.
    """
    w, h = cfg.rsl_width, cfg.rsl_height
    p_eff = cfg.p_eff
    s, m = cfg.resource_state_size, cfg.merge_factor

    merges = m - 1
    turns = np.zeros((h, w), dtype=np.int64)
    if merges:
        successes = rng.binomial(merges, p_eff, size=(h, w))
        failures = merges - successes
        plus = rng.binomial(failures, 0.5)
        turns += 2 * plus - failures
    else:
        successes = np.zeros((h, w), dtype=np.int64)
    degree = (s - 1) + successes * (s - 2) - (merges - successes)
    spare = np.clip(degree - TEMPORAL_DEGREE, 0, None).astype(np.int64)

    layer = MergedLayer(
        w,
        h,
        np.zeros((h, max(w - 1, 0)), dtype=bool),
        np.zeros((max(h - 1, 0), w), dtype=bool),
        spare,
        merge_fusions=merges * w * h,
        z_turns=turns,
    )
    _fuse(layer, rng, p_eff, retry=False)
    for _ in range(cfg.retry_batches):
        _fuse(layer, rng, p_eff, retry=True)
    return layer, layer.fusions
