# -*- coding: utf-8 -*-
"""Brute-force state vectors for checking decompositions and feed-forward.

Wire 0 is the most significant bit of a basis-state index.
"""

from typing import Dict, List, Optional

import numpy as np

from src.frontend import (
    Circuit,
    JGate,
    MeasurementPattern,
    adjusted_angle,
    equatorial_angle,
    feed_forward_domains,
    measurement_order,
)

MAX_STATE_QUBITS = 16

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def j_matrix(alpha: float) -> np.ndarray:
    """J(alpha) = 1/sqrt(2) [[1, e^{i alpha}], [1, -e^{i alpha}]]"""
    phase = np.exp(1j * alpha)
    return np.array([[1, phase], [1, -phase]], dtype=complex) / np.sqrt(2)


def apply_single(
    state: np.ndarray, matrix: np.ndarray, qubit: int, n: int
) -> np.ndarray:
    """Apply a 2x2 matrix to one qubit of an n-qubit vector"""
    tensor = state.reshape((2,) * n)
    tensor = np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [qubit])), 0, qubit)
    return tensor.reshape(-1)


def apply_cz(state: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    """Apply CZ between qubits a and b"""
    tensor = state.reshape((2,) * n).copy()
    index: List[object] = [slice(None)] * n
    index[a] = 1
    index[b] = 1
    tensor[tuple(index)] *= -1
    return tensor.reshape(-1)


def basis_state(bits: List[int]) -> np.ndarray:
    """|bits> with bits[0] as the most significant bit"""
    state = np.zeros(2 ** len(bits), dtype=complex)
    state[int("".join(str(b) for b in bits) or "0", 2)] = 1.0
    return state


def simulate(circuit: Circuit, state: Optional[np.ndarray] = None) -> np.ndarray:
    """U|state>, default input |0...0>"""
    n = circuit.qubit_count
    if n > MAX_STATE_QUBITS:
        raise ValueError(f"state vector limited to {MAX_STATE_QUBITS} qubits")
    if state is None:
        state = basis_state([0] * n)
    for gate in circuit.gates:
        if isinstance(gate, JGate):
            state = apply_single(state, j_matrix(gate.angle), gate.wire, n)
        else:
            state = apply_cz(state, gate.a, gate.b, n)
    return state


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary, column k = U|k>"""
    dim = 2**circuit.qubit_count
    columns = [simulate(circuit, np.eye(dim, dtype=complex)[:, k]) for k in range(dim)]
    return np.stack(columns, axis=1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-8) -> bool:
    """True when a = e^{i theta} b"""
    flat_a, flat_b = a.reshape(-1), b.reshape(-1)
    pivot = int(np.argmax(np.abs(flat_b)))
    if abs(flat_b[pivot]) < atol:
        return bool(np.allclose(flat_a, flat_b, atol=atol))
    phase = flat_a[pivot] / flat_b[pivot]
    if not np.isclose(abs(phase), 1.0, atol=1e-6):
        return False
    return bool(np.allclose(flat_a, phase * flat_b, atol=atol))


def pattern_output_state(
    pattern: MeasurementPattern, outcomes: Dict[int, int]
) -> np.ndarray:
    """Normalized output state of one outcome branch, corrections applied.

    Inputs start in |+>, nodes are measured in measurement_order with the
    adjusted angle (-1)^s alpha + t pi, and the output wires are ordered by
    wire index.
    """
    nodes = sorted(pattern.graph.nodes)
    n = len(nodes)
    if n > MAX_STATE_QUBITS:
        raise ValueError(f"state vector limited to {MAX_STATE_QUBITS} qubits")
    position = {node: i for i, node in enumerate(nodes)}
    state = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    for u, v in pattern.edges():
        state = apply_cz(state, position[u], position[v], n)

    s_domain, t_domain = feed_forward_domains(pattern)
    tensor = state.reshape((2,) * n)
    alive = list(nodes)
    for node in measurement_order(pattern):
        s = sum(outcomes[i] for i in s_domain[node])
        t = sum(outcomes[i] for i in t_domain[node])
        theta = adjusted_angle(equatorial_angle(pattern.node_basis[node]), s, t)
        sign = -1 if outcomes[node] else 1
        bra = np.array([1.0, sign * np.exp(-1j * theta)], dtype=complex) / np.sqrt(2)
        tensor = np.tensordot(bra, tensor, axes=([0], [alive.index(node)]))
        alive.remove(node)

    order = [alive.index(node) for node in pattern.outputs]
    tensor = np.transpose(tensor, order) if order else tensor
    m = len(order)
    out = np.asarray(tensor, dtype=complex).reshape(-1)
    for wire, node in enumerate(pattern.outputs):
        if sum(outcomes[i] for i in s_domain[node]) % 2:
            out = apply_single(out, PAULI_X, wire, m)
        if sum(outcomes[i] for i in t_domain[node]) % 2:
            out = apply_single(out, PAULI_Z, wire, m)
    norm = np.linalg.norm(out)
    return out / norm if norm > 0 else out
