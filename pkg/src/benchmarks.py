# -*- coding: utf-8 -*-
"""Benchmark circuit generators, decomposed into {J, CZ}.

Randomized instances draw from numpy's PCG64 seeded with the benchmark seed,
so (name, n_qubits, seed) pins the circuit.
"""

import math
from itertools import combinations
from typing import Callable, Dict, List, Optional

import numpy as np
from loguru import logger

from src.errors import ConfigError
from src.frontend import Circuit, CZGate, Gate, JGate

RNG_ALGORITHM = "PCG64"

# Circuit hyper-parameters not pinned down elsewhere; surfaced in reports
QAOA_LAYERS = 1
VQE_ROTATION_LAYERS = 2


def benchmark_rng(seed: int) -> np.random.Generator:
    """Generator used for every randomized benchmark"""
    return np.random.Generator(np.random.PCG64(seed))


class CircuitBuilder:
    """Gate-level builder lowering standard gates into J and CZ.

    Two consecutive J(0) on a wire multiply to the identity and are dropped.
    """

    def __init__(self, qubit_count: int) -> None:
        self.qubit_count = qubit_count
        self._gates: List[Optional[Gate]] = []
        self._last: Dict[int, Optional[int]] = {w: None for w in range(qubit_count)}

    def j(self, wire: int, angle: float) -> "CircuitBuilder":
        """Raw J(angle)"""
        gate = JGate(wire, angle)
        last = self._last[wire]
        if gate.angle == 0.0 and last is not None:
            previous = self._gates[last]
            if isinstance(previous, JGate) and previous.angle == 0.0:
                self._gates[last] = None
                self._last[wire] = None
                return self
        self._gates.append(gate)
        self._last[wire] = len(self._gates) - 1
        return self

    def cz(self, a: int, b: int) -> "CircuitBuilder":
        """Raw CZ"""
        self._gates.append(CZGate(a, b))
        self._last[a] = self._last[b] = len(self._gates) - 1
        return self

    def h(self, wire: int) -> "CircuitBuilder":
        """Hadamard = J(0)"""
        return self.j(wire, 0.0)

    def phase(self, wire: int, theta: float) -> "CircuitBuilder":
        """diag(1, e^{i theta}) = J(0) J(theta)"""
        return self.j(wire, theta).j(wire, 0.0)

    def rx(self, wire: int, theta: float) -> "CircuitBuilder":
        """X rotation up to global phase: H diag(1, e^{i theta}) H"""
        return self.j(wire, 0.0).j(wire, theta)

    def t(self, wire: int) -> "CircuitBuilder":
        """T gate"""
        return self.phase(wire, math.pi / 4)

    def tdg(self, wire: int) -> "CircuitBuilder":
        """T^dagger"""
        return self.phase(wire, -math.pi / 4)

    def cx(self, control: int, target: int) -> "CircuitBuilder":
        """CNOT = H_t CZ H_t"""
        return self.h(target).cz(control, target).h(target)

    def cphase(self, a: int, b: int, lam: float) -> "CircuitBuilder":
        """Controlled phase diag(1, 1, 1, e^{i lam})"""
        self.phase(a, lam / 2)
        self.cx(a, b)
        self.phase(b, -lam / 2)
        self.cx(a, b)
        return self.phase(b, lam / 2)

    def ccx(self, a: int, b: int, c: int) -> "CircuitBuilder":
        """Toffoli with controls a, b and target c"""
        self.h(c)
        self.cx(b, c).tdg(c)
        self.cx(a, c).t(c)
        self.cx(b, c).tdg(c)
        self.cx(a, c).t(b).t(c).h(c)
        self.cx(a, b).t(a).tdg(b)
        return self.cx(a, b)

    def swap(self, a: int, b: int) -> "CircuitBuilder":
        """Three CNOTs"""
        return self.cx(a, b).cx(b, a).cx(a, b)

    def build(self) -> Circuit:
        """Circuit with the cancelled pairs removed"""
        return Circuit(self.qubit_count, [g for g in self._gates if g is not None])


def qaoa(n_qubits: int, seed: int) -> Circuit:
    """MaxCut QAOA over a random graph with half of all possible edges."""
    rng = benchmark_rng(seed)
    pairs = list(combinations(range(n_qubits), 2))
    chosen = sorted(rng.choice(len(pairs), size=len(pairs) // 2, replace=False))
    builder = CircuitBuilder(n_qubits)
    for wire in range(n_qubits):
        builder.h(wire)
    for _ in range(QAOA_LAYERS):
        gamma, beta = rng.uniform(0, math.pi, size=2)
        for index in chosen:
            a, b = pairs[int(index)]
            builder.cx(a, b).phase(b, 2 * gamma).cx(a, b)
        for wire in range(n_qubits):
            builder.rx(wire, 2 * beta)
    return builder.build()


def qft(n_qubits: int, seed: int = 0) -> Circuit:  # pylint: disable=unused-argument
    """Textbook QFT, wire 0 most significant, with the final reversal swaps."""
    builder = CircuitBuilder(n_qubits)
    for j in range(n_qubits):
        builder.h(j)
        for k in range(j + 1, n_qubits):
            builder.cphase(k, j, math.pi / 2 ** (k - j))
    for j in range(n_qubits // 2):
        builder.swap(j, n_qubits - 1 - j)
    return builder.build()


def vqe(n_qubits: int, seed: int) -> Circuit:
    """Rotation layer, CZ between every pair, rotation layer."""
    rng = benchmark_rng(seed)
    builder = CircuitBuilder(n_qubits)
    for layer in range(VQE_ROTATION_LAYERS):
        for wire in range(n_qubits):
            first, second = rng.uniform(0, 2 * math.pi, size=2)
            builder.j(wire, first).j(wire, second)
        if layer == 0:
            for a, b in combinations(range(n_qubits), 2):
                builder.cz(a, b)
    return builder.build()


def rca_layout(n_qubits: int) -> Dict[str, List[int]]:
    """Wire roles of the ripple-carry adder.

    Wire 0 is the incoming-carry ancilla, then b_i and a_i interleave for
    k = (n-1)//2 bits; an even qubit count leaves a final carry-out wire.
    """
    bits = (n_qubits - 1) // 2
    if bits < 1:
        raise ConfigError(f"rca needs at least 3 qubits, got {n_qubits}")
    layout = {
        "carry_in": [0],
        "b": [1 + 2 * i for i in range(bits)],
        "a": [2 + 2 * i for i in range(bits)],
        "carry_out": [n_qubits - 1] if n_qubits % 2 == 0 else [],
    }
    return layout


def rca(n_qubits: int, seed: int = 0) -> Circuit:  # pylint: disable=unused-argument
    """Cuccaro ripple-carry adder computing b <- a + b.

    n_qubits counts every wire, carry wires included: n=4 adds 1-bit operands
    with carry-out, n=5 adds 2-bit operands mod 4 and n=6 adds 2-bit operands
    with carry-out. Operand width is (n_qubits - 1) // 2, see `rca_layout`.
    """
    layout = rca_layout(n_qubits)
    a, b, c0 = layout["a"], layout["b"], layout["carry_in"][0]
    builder = CircuitBuilder(n_qubits)

    def majority(c: int, y: int, x: int) -> None:
        builder.cx(x, y).cx(x, c).ccx(c, y, x)

    def unmajority(c: int, y: int, x: int) -> None:
        builder.ccx(c, y, x).cx(x, c).cx(c, y)

    majority(c0, b[0], a[0])
    for i in range(1, len(a)):
        majority(a[i - 1], b[i], a[i])
    if layout["carry_out"]:
        builder.cx(a[-1], layout["carry_out"][0])
    for i in range(len(a) - 1, 0, -1):
        unmajority(a[i - 1], b[i], a[i])
    unmajority(c0, b[0], a[0])
    return builder.build()


BENCHMARKS: Dict[str, Callable[[int, int], Circuit]] = {
    "qaoa": qaoa,
    "qft": qft,
    "rca": rca,
    "vqe": vqe,
}


def build_benchmark(name: str, n_qubits: int, seed: int = 0) -> Circuit:
    """Deterministic benchmark circuit for (name, n_qubits, seed)."""
    if name not in BENCHMARKS:
        logger.error(f"Unsupported benchmark: {name}")
        raise ConfigError(
            f"unsupported benchmark {name!r}, choose from {sorted(BENCHMARKS)}"
        )
    if n_qubits < 2:
        raise ConfigError(f"benchmarks need at least 2 qubits, got {n_qubits}")
    circuit = BENCHMARKS[name](n_qubits, seed)
    logger.debug(
        f"Built {name}-{n_qubits} (seed {seed}): "
        f"{circuit.j_count} J, {circuit.cz_count} CZ"
    )
    return circuit
