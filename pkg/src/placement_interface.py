# -*- coding: utf-8 -*-
"""Abstract placement strategy interface for the mapper."""

from abc import ABC, abstractmethod
from typing import Dict, List, Sequence

from src.ir import Column, Coord


class PlacementStrategy(ABC):
    """Decides which front node goes next and where it may sit"""

    name = "abstract"

    @abstractmethod
    def order_front(
        self, front: Sequence[int], placed_neighbors: Dict[int, int]
    ) -> List[int]:
        """Front nodes in the order placement should try them

        Args:
            front: DAG front layer
            placed_neighbors: node -> number of its neighbors already placed

        Returns:
            The same nodes, reordered
        """

    @abstractmethod
    def rank_sites(
        self, free: Sequence[Coord], anchors: Sequence[Sequence[Column]]
    ) -> List[Coord]:
        """Free sites of the current layer, best first

        Args:
            free: Unoccupied sites of the current layer
            anchors: For every placed neighbor, the columns it can be reached from

        Returns:
            Candidate sites in preference order
        """
