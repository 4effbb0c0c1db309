# -*- coding: utf-8 -*-
"""Shared fixtures for the test suite."""

from typing import Callable

import networkx as nx
import pytest

from src.graphstate import GraphState, NodeRole


def graph_from_networkx(graph: nx.Graph) -> GraphState:
    """GraphState over nodes 0..n-1 of a networkx graph"""
    return GraphState.from_edges(graph.number_of_nodes(), graph.edges())


@pytest.fixture
def two_stars() -> GraphState:
    """Star A (root 0, leaves 1-4) and star B (root 5, leaves 6-9)"""
    edges = [(0, leaf) for leaf in range(1, 5)] + [(5, leaf) for leaf in range(6, 10)]
    graph = GraphState.from_edges(10, edges)
    for root in (0, 5):
        graph.roles[root] = NodeRole.ROOT
    for leaf in (1, 2, 3, 4, 6, 7, 8, 9):
        graph.roles[leaf] = NodeRole.LEAF
    return graph


@pytest.fixture
def triangle() -> GraphState:
    """Triangle on a=0, b=1, c=2"""
    return GraphState.from_edges(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def path() -> GraphState:
    """Path b-a-c with a=0, b=1, c=2"""
    return GraphState.from_edges(3, [(0, 1), (0, 2)])


@pytest.fixture
def random_graph() -> Callable[[int, int], GraphState]:
    """Seeded G(n, 1/2) graph factory"""

    def build(n: int, seed: int) -> GraphState:
        return graph_from_networkx(nx.gnp_random_graph(n, 0.5, seed=seed))

    return build
