# -*- coding: utf-8 -*-
"""Desk-scale stabilizer tableau used as ground truth for the rewrite rules.

Rows 0..n-1 hold destabilizers, rows n..2n-1 stabilizers, each as X/Z bit
vectors plus a sign bit (Y encoded as x=z=1). Every operation returns a new
tableau.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import OracleError
from src.graphstate import ByproductWord, Generator, GraphState, Pauli, SignedPauli

MAX_QUBITS = 12

_MATRICES = {
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

_BITS = {Pauli.X: (1, 0), Pauli.Y: (1, 1), Pauli.Z: (0, 1)}
_FROM_BITS = {bits: pauli for pauli, bits in _BITS.items()}


def generator_unitary(generator: Generator) -> np.ndarray:
    """2x2 matrix of exp(sign * i pi/4 P)"""
    angle = generator.sign * np.pi / 4
    return np.cos(angle) * np.eye(2) + 1j * np.sin(angle) * _MATRICES[generator.axis]


def _conjugation_table() -> Dict[Generator, Dict[Pauli, Tuple[int, Pauli]]]:
    """U P U^dagger for every generator, read off the explicit matrices."""
    table: Dict[Generator, Dict[Pauli, Tuple[int, Pauli]]] = {}
    for generator in Generator:
        unitary = generator_unitary(generator)
        images: Dict[Pauli, Tuple[int, Pauli]] = {}
        for pauli, matrix in _MATRICES.items():
            image = unitary @ matrix @ unitary.conj().T
            for candidate, reference in _MATRICES.items():
                for sign in (1, -1):
                    if np.allclose(image, sign * reference):
                        images[pauli] = (sign, candidate)
        table[generator] = images
    return table


# U_Z+: X -> -Y, Y -> X; U_Z-: X -> Y, Y -> -X
# U_X+: Z -> Y, Y -> -Z; U_X-: Z -> -Y, Y -> Z
CONJUGATION_TABLE = _conjugation_table()


@dataclass(frozen=True)
class Tableau:
    """Aaronson-Gottesman tableau over the labeled qubits"""

    qubits: Tuple[int, ...]
    x: np.ndarray
    z: np.ndarray
    r: np.ndarray

    @property
    def n(self) -> int:
        """Qubit count"""
        return len(self.qubits)

    def copy(self) -> "Tableau":
        """Deep copy"""
        return Tableau(self.qubits, self.x.copy(), self.z.copy(), self.r.copy())

    def index(self, qubit: int) -> int:
        """Column of a qubit label"""
        try:
            return self.qubits.index(qubit)
        except ValueError as e:
            raise OracleError(f"qubit {qubit} is not part of the tableau") from e

    def row(self, product: SignedPauli) -> Tuple[np.ndarray, np.ndarray, int]:
        """Bit-vector form of a signed product"""
        x = np.zeros(self.n, dtype=np.uint8)
        z = np.zeros(self.n, dtype=np.uint8)
        for qubit, pauli in product.ops:
            col = self.index(qubit)
            x[col], z[col] = _BITS[pauli]
        return x, z, 0 if product.sign == 1 else 1

    def stabilizers(self) -> List[SignedPauli]:
        """Stabilizer generators as signed products"""
        result = []
        for i in range(self.n, 2 * self.n):
            ops = tuple(
                (q, _FROM_BITS[(int(self.x[i, col]), int(self.z[i, col]))])
                for col, q in enumerate(self.qubits)
                if self.x[i, col] or self.z[i, col]
            )
            result.append(SignedPauli(ops, -1 if self.r[i] else 1))
        return result


def _phase_exponent(
    x1: np.ndarray, z1: np.ndarray, x2: np.ndarray, z2: np.ndarray
) -> int:
    """Power of i picked up by the product P1 P2, summed over qubits"""
    x1, z1 = x1.astype(np.int64), z1.astype(np.int64)
    x2, z2 = x2.astype(np.int64), z2.astype(np.int64)
    g = np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(
            (x1 == 1) & (z1 == 0),
            z2 * (2 * x2 - 1),
            np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0),
        ),
    )
    return int(g.sum())


def _multiply(
    left: Tuple[np.ndarray, np.ndarray, int], right: Tuple[np.ndarray, np.ndarray, int]
) -> Tuple[np.ndarray, np.ndarray, int]:
    x1, z1, r1 = left
    x2, z2, r2 = right
    total = (2 * r1 + 2 * r2 + _phase_exponent(x1, z1, x2, z2)) % 4
    return x1 ^ x2, z1 ^ z2, total // 2


def _rowsum(t: Tableau, h: int, i: int) -> None:
    """Row h := row i * row h, in place"""
    x, z, r = _multiply(
        (t.x[i], t.z[i], int(t.r[i])), (t.x[h], t.z[h], int(t.r[h]))
    )
    t.x[h], t.z[h], t.r[h] = x, z, r


def _anticommuting(t: Tableau, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Mask of rows that anticommute with (x, z)"""
    symplectic = (t.x.astype(np.int64) @ z.astype(np.int64)) + (
        t.z.astype(np.int64) @ x.astype(np.int64)
    )
    return (symplectic % 2).astype(bool)


def tableau_from_graph(graph: GraphState) -> Tableau:
    """Graph state |G> with stabilizers X_i Z_N(i) and destabilizers Z_i."""
    qubits = tuple(sorted(graph.nodes))
    n = len(qubits)
    if n > MAX_QUBITS:
        raise OracleError(f"oracle is limited to {MAX_QUBITS} qubits, got {n}")
    column = {q: i for i, q in enumerate(qubits)}
    x = np.zeros((2 * n, n), dtype=np.uint8)
    z = np.zeros((2 * n, n), dtype=np.uint8)
    for i, q in enumerate(qubits):
        z[i, i] = 1
        x[n + i, i] = 1
        for neighbor in graph.neighbors(q):
            z[n + i, column[neighbor]] = 1
    return Tableau(qubits, x, z, np.zeros(2 * n, dtype=np.uint8))


def expectation(t: Tableau, product: SignedPauli) -> Optional[int]:
    """Deterministic outcome bit of measuring product, None when random."""
    x, z, r = t.row(product)
    n = t.n
    anticommutes = _anticommuting(t, x, z)
    if anticommutes[n:].any():
        return None
    scratch = (np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8), 0)
    for i in np.flatnonzero(anticommutes[:n]):
        row = n + int(i)
        scratch = _multiply((t.x[row], t.z[row], int(t.r[row])), scratch)
    return scratch[2] ^ r


def measure_pauli(
    t: Tableau,
    product: SignedPauli,
    outcome: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tableau, int, bool]:
    """Measure a signed Pauli product.

    A random measurement takes the forced outcome if given, else a draw
    from rng, else 0. Forcing the wrong value on a deterministic measurement
    raises OracleError.
    """
    deterministic = expectation(t, product)
    if deterministic is not None:
        if outcome is not None and outcome != deterministic:
            raise OracleError(
                f"forced outcome {outcome} contradicts deterministic {deterministic}"
                f" for {product}"
            )
        return t.copy(), deterministic, True

    if outcome is None:
        outcome = int(rng.integers(2)) if rng is not None else 0
    result = t.copy()
    n = result.n
    x, z, r = result.row(product)
    anticommutes = _anticommuting(result, x, z)
    pivot = n + int(np.flatnonzero(anticommutes[n:])[0])
    for i in np.flatnonzero(anticommutes):
        if int(i) != pivot:
            _rowsum(result, int(i), pivot)
    destabilizer = pivot - n
    result.x[destabilizer] = result.x[pivot]
    result.z[destabilizer] = result.z[pivot]
    result.r[destabilizer] = result.r[pivot]
    result.x[pivot], result.z[pivot], result.r[pivot] = x, z, r ^ outcome
    return result, int(outcome), False


def apply_local_clifford(t: Tableau, word: ByproductWord, qubit: int) -> Tableau:
    """Evolve the state by the word's unitary on one qubit (U P U^dagger per row)."""
    col = t.index(qubit)
    result = t.copy()
    for generator in word:
        images = CONJUGATION_TABLE[generator]
        for i in range(2 * result.n):
            bits = (int(result.x[i, col]), int(result.z[i, col]))
            if bits == (0, 0):
                continue
            sign, image = images[_FROM_BITS[bits]]
            result.x[i, col], result.z[i, col] = _BITS[image]
            if sign == -1:
                result.r[i] ^= 1
    return result


def apply_words(t: Tableau, words: Dict[int, ByproductWord]) -> Tableau:
    """Apply several per-qubit words"""
    for qubit in sorted(words):
        t = apply_local_clifford(t, words[qubit], qubit)
    return t


def states_equal(t1: Tableau, t2: Tableau) -> bool:
    """True iff the two signed stabilizer groups coincide."""
    if t1.qubits != t2.qubits:
        raise OracleError(f"tableaux over different qubits: {t1.qubits} vs {t2.qubits}")
    return all(expectation(t1, s) == 0 for s in t2.stabilizers())


def measure_sequence(
    t: Tableau, products: Sequence[SignedPauli], outcomes: Sequence[int]
) -> Tableau:
    """Measure products in order with forced outcomes"""
    for product, outcome in zip(products, outcomes):
        t, _, _ = measure_pauli(t, product, outcome)
    return t
