# -*- coding: utf-8 -*-
"""Tests for the stabilizer tableau oracle."""

import numpy as np
import pytest

from src.errors import OracleError
from src.graphstate import (
    Generator,
    GraphState,
    Pauli,
    SignedPauli,
    lc_byproducts,
    local_complement,
)
from src.oracle import (
    CONJUGATION_TABLE,
    apply_local_clifford,
    apply_words,
    expectation,
    measure_pauli,
    states_equal,
    tableau_from_graph,
)


def single(qubit: int, pauli: Pauli, sign: int = 1) -> SignedPauli:
    """One-qubit signed Pauli"""
    return SignedPauli(((qubit, pauli),), sign)


def stabilizer_strings(graph: GraphState) -> list:
    return [str(s) for s in tableau_from_graph(graph).stabilizers()]


def test_tableau_from_graph_examples(triangle: GraphState) -> None:
    assert stabilizer_strings(GraphState.from_edges(1, [])) == ["+X0"]
    assert stabilizer_strings(GraphState.from_edges(2, [(0, 1)])) == ["+X0Z1", "+Z0X1"]
    assert stabilizer_strings(triangle) == ["+X0Z1Z2", "+Z0X1Z2", "+Z0Z1X2"]


def test_tableau_size_limit() -> None:
    with pytest.raises(OracleError, match="limited"):
        tableau_from_graph(GraphState.from_edges(13, []))


def test_measure_z_on_plus_is_random() -> None:
    plus = tableau_from_graph(GraphState.from_edges(1, []))
    collapsed, outcome, deterministic = measure_pauli(plus, single(0, Pauli.Z), 1)
    assert not deterministic
    assert outcome == 1
    assert [str(s) for s in collapsed.stabilizers()] == ["-Z0"]


def test_measure_x_on_plus_is_deterministic() -> None:
    plus = tableau_from_graph(GraphState.from_edges(1, []))
    _, outcome, deterministic = measure_pauli(plus, single(0, Pauli.X))
    assert deterministic
    assert outcome == 0
    with pytest.raises(OracleError, match="contradicts"):
        measure_pauli(plus, single(0, Pauli.X), outcome=1)


def test_fusion_between_clusters_gives_two_random_bits() -> None:
    # a=0 - q1=1 and q2=2 - b=3
    tableau = tableau_from_graph(GraphState.from_edges(4, [(0, 1), (2, 3)]))
    xz = SignedPauli(((1, Pauli.X), (2, Pauli.Z)))
    zx = SignedPauli(((1, Pauli.Z), (2, Pauli.X)))
    rng = np.random.default_rng(3)
    tableau, _, first = measure_pauli(tableau, xz, rng=rng)
    tableau, _, second = measure_pauli(tableau, zx, rng=rng)
    assert not first and not second


def test_fusion_products_are_stabilizers_of_an_edge() -> None:
    edge = tableau_from_graph(GraphState.from_edges(2, [(0, 1)]))
    assert expectation(edge, SignedPauli(((0, Pauli.X), (1, Pauli.Z)))) == 0
    assert expectation(edge, SignedPauli(((0, Pauli.Y), (1, Pauli.Y)))) == 0


def test_stabilizer_elements_stay_deterministic(random_graph) -> None:
    rng = np.random.default_rng(11)
    graph = random_graph(6, 4)
    tableau = tableau_from_graph(graph)
    tableau, _, _ = measure_pauli(tableau, single(2, Pauli.Y), rng=rng)
    tableau, _, _ = measure_pauli(
        tableau, SignedPauli(((0, Pauli.X), (5, Pauli.Z))), rng=rng
    )
    n = tableau.n
    assert tableau.x.shape == (2 * n, n)
    for stabilizer in tableau.stabilizers():
        assert expectation(tableau, stabilizer) == 0
    # row-wise symplectic form: stabilizers commute pairwise
    x, z = tableau.x[n:].astype(int), tableau.z[n:].astype(int)
    assert not ((x @ z.T + z @ x.T) % 2).any()


def test_conjugation_table_matches_convention() -> None:
    assert CONJUGATION_TABLE[Generator.Z_PLUS][Pauli.X] == (-1, Pauli.Y)
    assert CONJUGATION_TABLE[Generator.Z_PLUS][Pauli.Y] == (1, Pauli.X)
    assert CONJUGATION_TABLE[Generator.Z_PLUS][Pauli.Z] == (1, Pauli.Z)
    assert CONJUGATION_TABLE[Generator.X_PLUS][Pauli.Z] == (1, Pauli.Y)
    assert CONJUGATION_TABLE[Generator.X_PLUS][Pauli.X] == (1, Pauli.X)
    assert CONJUGATION_TABLE[Generator.X_MINUS][Pauli.Z] == (-1, Pauli.Y)


def test_apply_local_clifford_examples() -> None:
    plus = tableau_from_graph(GraphState.from_edges(1, []))
    rotated = apply_local_clifford(plus, (Generator.Z_PLUS,), 0)
    assert [str(s) for s in rotated.stabilizers()] == ["-Y0"]
    assert states_equal(apply_local_clifford(plus, (), 0), plus)
    back = apply_local_clifford(rotated, (Generator.Z_MINUS,), 0)
    assert states_equal(back, plus)
    with pytest.raises(OracleError):
        apply_local_clifford(plus, (Generator.Z_PLUS,), 3)


def test_states_equal(path: GraphState) -> None:
    edge = tableau_from_graph(GraphState.from_edges(2, [(0, 1)]))
    isolated = tableau_from_graph(GraphState.from_edges(2, []))
    assert states_equal(edge, edge)
    assert not states_equal(edge, isolated)
    with pytest.raises(OracleError, match="different qubits"):
        states_equal(edge, tableau_from_graph(path))


def test_local_complement_equivalence(random_graph) -> None:
    for seed in range(10):
        graph = random_graph(6, seed)
        for v in graph.nodes:
            rotated = apply_words(tableau_from_graph(graph), lc_byproducts(graph, v))
            expected = tableau_from_graph(local_complement(graph, v))
            assert states_equal(rotated, expected)
