# -*- coding: utf-8 -*-
"""Placement strategies and the factory selecting them by name."""

from typing import Dict, List, Sequence, Type

from loguru import logger

from src.errors import ConfigError
from src.ir import Column, Coord
from src.placement_interface import PlacementStrategy


def manhattan(a: Column, b: Column) -> int:
    """Grid distance between two columns"""
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class LocalityPlacement(PlacementStrategy):
    """Most-connected node first, nearest to its placed neighbors"""

    name = "locality"

    def order_front(
        self, front: Sequence[int], placed_neighbors: Dict[int, int]
    ) -> List[int]:
        return sorted(front, key=lambda node: (-placed_neighbors.get(node, 0), node))

    def rank_sites(
        self, free: Sequence[Coord], anchors: Sequence[Sequence[Column]]
    ) -> List[Coord]:
        def score(site: Coord) -> int:
            return sum(
                min(manhattan(site.column, column) for column in columns)
                for columns in anchors
                if columns
            )

        return sorted(free, key=lambda site: (score(site), site.y, site.x))


class RowMajorPlacement(PlacementStrategy):
    """Front in id order, first free site"""

    name = "row_major"

    def order_front(
        self, front: Sequence[int], placed_neighbors: Dict[int, int]
    ) -> List[int]:
        return sorted(front)

    def rank_sites(
        self, free: Sequence[Coord], anchors: Sequence[Sequence[Column]]
    ) -> List[Coord]:
        return sorted(free, key=lambda site: (site.y, site.x))


STRATEGIES: Dict[str, Type[PlacementStrategy]] = {
    LocalityPlacement.name: LocalityPlacement,
    RowMajorPlacement.name: RowMajorPlacement,
}


class PlacementFactory:  # pylint: disable=too-few-public-methods
    """Factory to create placement strategies"""

    @staticmethod
    def create_strategy(name: str) -> PlacementStrategy:
        """Create the strategy registered under name

        Raises:
            ConfigError: If no strategy has that name
        """
        try:
            return STRATEGIES[name]()
        except KeyError as e:
            logger.error(f"Unknown placement strategy '{name}'")
            raise ConfigError(
                f"unknown placement {name!r}, choose from {sorted(STRATEGIES)}"
            ) from e
