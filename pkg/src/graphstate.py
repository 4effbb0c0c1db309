# -*- coding: utf-8 -*-
"""Graph-state data model and the exact rewrite rules used by the compiler.

Byproduct words list generators in application order: the word (g1, g2)
means g1 acts first. Pushing a word through a measurement therefore walks it
right-to-left.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

import networkx as nx

from src.errors import GraphRewriteError, UnsupportedBasisError


class Pauli(str, Enum):
    """Single-qubit Pauli axis"""

    X = "X"
    Y = "Y"
    Z = "Z"


class Generator(str, Enum):
    """exp(+-i pi/4 P) for P in {X, Z}"""

    Z_PLUS = "U_Z+"
    Z_MINUS = "U_Z-"
    X_PLUS = "U_X+"
    X_MINUS = "U_X-"

    @property
    def axis(self) -> Pauli:
        """Rotation axis of the generator"""
        return Pauli.Z if self in (Generator.Z_PLUS, Generator.Z_MINUS) else Pauli.X

    @property
    def sign(self) -> int:
        """+1 for exp(+i pi/4 P), -1 for exp(-i pi/4 P)"""
        return 1 if self in (Generator.Z_PLUS, Generator.X_PLUS) else -1

    def inverse(self) -> "Generator":
        """Generator with the opposite rotation sign"""
        return _INVERSE[self]


_INVERSE = {
    Generator.Z_PLUS: Generator.Z_MINUS,
    Generator.Z_MINUS: Generator.Z_PLUS,
    Generator.X_PLUS: Generator.X_MINUS,
    Generator.X_MINUS: Generator.X_PLUS,
}

ByproductWord = Tuple[Generator, ...]

# Pauli Z up to a global phase
PAULI_Z_WORD: ByproductWord = (Generator.Z_PLUS, Generator.Z_PLUS)

# U^dagger P U for every generator U, as (sign, Pauli)
HEISENBERG_IMAGES: Dict[Generator, Dict[Pauli, Tuple[int, Pauli]]] = {
    Generator.Z_PLUS: {
        Pauli.X: (1, Pauli.Y),
        Pauli.Y: (-1, Pauli.X),
        Pauli.Z: (1, Pauli.Z),
    },
    Generator.Z_MINUS: {
        Pauli.X: (-1, Pauli.Y),
        Pauli.Y: (1, Pauli.X),
        Pauli.Z: (1, Pauli.Z),
    },
    Generator.X_PLUS: {
        Pauli.X: (1, Pauli.X),
        Pauli.Y: (1, Pauli.Z),
        Pauli.Z: (-1, Pauli.Y),
    },
    Generator.X_MINUS: {
        Pauli.X: (1, Pauli.X),
        Pauli.Y: (-1, Pauli.Z),
        Pauli.Z: (1, Pauli.Y),
    },
}

_AXIS_VECTORS = {
    Pauli.X: (1.0, 0.0, 0.0),
    Pauli.Y: (0.0, 1.0, 0.0),
    Pauli.Z: (0.0, 0.0, 1.0),
}

_ANGLE_DIGITS = 9
TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Map an angle into [0, 2pi), snapping values within rounding of 2pi to 0."""
    reduced = math.fmod(angle, TWO_PI)
    if reduced < 0:
        reduced += TWO_PI
    if abs(reduced - TWO_PI) < 1e-12:
        return 0.0
    return reduced


def invert_word(word: ByproductWord) -> ByproductWord:
    """Inverse unitary of a word: reversed order, flipped signs."""
    return tuple(generator.inverse() for generator in reversed(word))


class NodeRole(str, Enum):
    """Role of a node inside resource, program or physical graph states"""

    ROOT = "root"
    LEAF = "leaf"
    PROGRAM = "program"
    ANCILLA = "ancilla"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Measurement of sign * (cos(angle) P1 + sin(angle) P2).

    The sign is folded into the angle on construction, so every instance
    carries sign +1. Equality and hashing go through the Bloch vector, which
    makes physically identical bases compare equal across planes.
    """

    plane: Tuple[Pauli, Pauli]
    angle: float
    sign: int = 1

    def __post_init__(self) -> None:
        first, second = self.plane
        if first == second:
            raise UnsupportedBasisError(f"degenerate measurement plane {self.plane}")
        if self.sign not in (1, -1):
            raise UnsupportedBasisError(f"sign must be +1 or -1, got {self.sign}")
        angle = self.angle + (math.pi if self.sign == -1 else 0.0)
        object.__setattr__(self, "plane", (Pauli(first), Pauli(second)))
        object.__setattr__(self, "angle", normalize_angle(angle))
        object.__setattr__(self, "sign", 1)

    @classmethod
    def equatorial(cls, alpha: float) -> "MeasurementBasis":
        """E(alpha) = cos(alpha) X + sin(alpha) Y"""
        return cls((Pauli.X, Pauli.Y), alpha)

    def bloch_vector(self) -> Tuple[float, float, float]:
        """Unit vector of the measured observable"""
        first = _AXIS_VECTORS[self.plane[0]]
        second = _AXIS_VECTORS[self.plane[1]]
        cos_a, sin_a = math.cos(self.angle), math.sin(self.angle)
        return (
            cos_a * first[0] + sin_a * second[0],
            cos_a * first[1] + sin_a * second[1],
            cos_a * first[2] + sin_a * second[2],
        )

    def _key(self) -> Tuple[float, float, float]:
        # +0.0 keeps -0.0 and 0.0 in one hash bucket
        x, y, z = self.bloch_vector()
        return (
            round(x, _ANGLE_DIGITS) + 0.0,
            round(y, _ANGLE_DIGITS) + 0.0,
            round(z, _ANGLE_DIGITS) + 0.0,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MeasurementBasis):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def as_pauli(self) -> Optional[Tuple[int, Pauli]]:
        """(sign, axis) when the basis is a signed Pauli, otherwise None"""
        vector = self._key()
        for axis, unit in _AXIS_VECTORS.items():
            if vector == unit:
                return 1, axis
            if vector == tuple(-c + 0.0 for c in unit):
                return -1, axis
        return None

    def conjugated(self, generator: Generator) -> "MeasurementBasis":
        """Basis b' with M_b U = U M_b' for a single generator U."""
        images = HEISENBERG_IMAGES[generator]
        sign1, axis1 = images[self.plane[0]]
        sign2, axis2 = images[self.plane[1]]
        if sign1 == sign2:
            return MeasurementBasis((axis1, axis2), self.angle, sign1)
        return MeasurementBasis((axis1, axis2), -self.angle, sign1)

    def __repr__(self) -> str:
        plane = self.plane[0].value + self.plane[1].value
        return f"MeasurementBasis({plane}, {self.angle:.6f})"


Z_BASIS = MeasurementBasis((Pauli.Z, Pauli.X), 0.0)
X_BASIS = MeasurementBasis((Pauli.X, Pauli.Y), 0.0)
Y_BASIS = MeasurementBasis((Pauli.X, Pauli.Y), math.pi / 2)


@dataclass(frozen=True)
class SignedPauli:
    """Signed Pauli product, ops sorted by qubit and free of identities"""

    ops: Tuple[Tuple[int, Pauli], ...]
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise UnsupportedBasisError(f"sign must be +1 or -1, got {self.sign}")
        ordered = tuple(sorted((int(q), Pauli(p)) for q, p in self.ops))
        qubits = [q for q, _ in ordered]
        if len(set(qubits)) != len(qubits):
            raise UnsupportedBasisError(f"repeated qubit in Pauli product {self.ops}")
        object.__setattr__(self, "ops", ordered)

    @classmethod
    def from_mapping(cls, paulis: Mapping[int, Pauli], sign: int = 1) -> "SignedPauli":
        """Build from a qubit -> Pauli mapping"""
        return cls(tuple(paulis.items()), sign)

    def as_dict(self) -> Dict[int, Pauli]:
        """qubit -> Pauli view of the product"""
        return dict(self.ops)

    def commutes_with(self, other: "SignedPauli") -> bool:
        """True when the two products commute"""
        mine = self.as_dict()
        clashes = sum(
            1 for q, p in other.ops if q in mine and mine[q] != p
        )
        return clashes % 2 == 0

    def conjugated(self, generator: Generator, qubit: int) -> "SignedPauli":
        """Heisenberg image U^dagger P U of the product under U on one qubit"""
        paulis = self.as_dict()
        if qubit not in paulis:
            return self
        image_sign, image = HEISENBERG_IMAGES[generator][paulis[qubit]]
        paulis[qubit] = image
        return SignedPauli.from_mapping(paulis, self.sign * image_sign)

    def relabeled(self, mapping: Mapping[int, int]) -> "SignedPauli":
        """Same product with qubits renamed"""
        return SignedPauli(tuple((mapping[q], p) for q, p in self.ops), self.sign)

    def __str__(self) -> str:
        body = "".join(f"{p.value}{q}" for q, p in self.ops)
        return f"{'+' if self.sign == 1 else '-'}{body}"


@dataclass(frozen=True, eq=False)
class FusionBasis:
    """Two commuting, independent two-qubit products on qubits 0 and 1"""

    first: SignedPauli
    second: SignedPauli

    def __post_init__(self) -> None:
        for product in (self.first, self.second):
            if not product.ops or any(q not in (0, 1) for q, _ in product.ops):
                raise UnsupportedBasisError(
                    f"fusion product {product} must act on qubits 0 and 1"
                )
        if not self.first.commutes_with(self.second):
            raise UnsupportedBasisError(f"{self.first} and {self.second} anticommute")
        if self.first.ops == self.second.ops:
            raise UnsupportedBasisError(f"{self.first} and {self.second} are dependent")

    def products(self) -> Tuple[SignedPauli, SignedPauli]:
        """Both measured products"""
        return self.first, self.second

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FusionBasis):
            return NotImplemented
        return frozenset(self.products()) == frozenset(other.products())

    def __hash__(self) -> int:
        return hash(frozenset(self.products()))

    def __repr__(self) -> str:
        return f"FusionBasis({self.first}, {self.second})"


STANDARD_FUSION = FusionBasis(
    SignedPauli(((0, Pauli.X), (1, Pauli.Z))),
    SignedPauli(((0, Pauli.Z), (1, Pauli.X))),
)


@dataclass
class GraphState:
    """Labeled undirected graph with per-node basis, byproducts and role.

    NodeIds are allocated monotonically and never reused, so a trace of
    rewrites can be replayed id for id.
    """

    adjacency: Dict[int, Set[int]] = field(default_factory=dict)
    basis: Dict[int, Optional[MeasurementBasis]] = field(default_factory=dict)
    byproducts: Dict[int, ByproductWord] = field(default_factory=dict)
    roles: Dict[int, NodeRole] = field(default_factory=dict)
    next_id: int = 0

    @classmethod
    def from_edges(
        cls, node_count: int, edges: Iterable[Tuple[int, int]]
    ) -> "GraphState":
        """Graph with nodes 0..node_count-1 and the given edges"""
        graph = cls()
        for _ in range(node_count):
            graph.add_node()
        for u, v in edges:
            graph.add_edge(u, v)
        return graph

    @property
    def nodes(self) -> FrozenSet[int]:
        """Current node set"""
        return frozenset(self.adjacency)

    def __contains__(self, node: object) -> bool:
        return node in self.adjacency

    def __len__(self) -> int:
        return len(self.adjacency)

    def add_node(
        self,
        role: NodeRole = NodeRole.UNASSIGNED,
        basis: Optional[MeasurementBasis] = None,
    ) -> int:
        """Allocate a fresh NodeId"""
        node = self.next_id
        self.next_id += 1
        self.adjacency[node] = set()
        self.roles[node] = role
        self.basis[node] = basis
        return node

    def require(self, *nodes: int) -> None:
        """Raise GraphRewriteError for ids that are not in the graph"""
        for node in nodes:
            if node not in self.adjacency:
                raise GraphRewriteError(f"unknown node id {node}")

    def add_edge(self, u: int, v: int) -> None:
        """Add edge u-v (idempotent)"""
        self.require(u, v)
        if u == v:
            raise GraphRewriteError(f"self-loop on node {u}")
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)

    def remove_edge(self, u: int, v: int) -> None:
        """Remove edge u-v if present"""
        self.adjacency[u].discard(v)
        self.adjacency[v].discard(u)

    def toggle_edge(self, u: int, v: int) -> None:
        """Add the edge when absent, remove it when present"""
        if v in self.adjacency[u]:
            self.remove_edge(u, v)
        else:
            self.add_edge(u, v)

    def has_edge(self, u: int, v: int) -> bool:
        """True when u-v is an edge"""
        return v in self.adjacency.get(u, ())

    def neighbors(self, node: int) -> FrozenSet[int]:
        """Neighbor set of a node"""
        self.require(node)
        return frozenset(self.adjacency[node])

    def degree(self, node: int) -> int:
        """Number of neighbors"""
        return len(self.neighbors(node))

    def edges(self) -> List[Tuple[int, int]]:
        """Sorted edge list with u < v"""
        return sorted(
            (u, v) for u, nbrs in self.adjacency.items() for v in nbrs if u < v
        )

    def remove_node(self, node: int) -> None:
        """Delete a node together with its edges and annotations"""
        self.require(node)
        for other in self.adjacency.pop(node):
            self.adjacency[other].discard(node)
        self.basis.pop(node, None)
        self.byproducts.pop(node, None)
        self.roles.pop(node, None)

    def byproduct(self, node: int) -> ByproductWord:
        """Pending word of a node, empty when none was recorded"""
        return self.byproducts.get(node, ())

    def record(self, node: int, word: ByproductWord) -> None:
        """Add a byproduct produced by a rewrite of the current graph.

        The state is W_old W_new |G'>, so the new word goes first in
        application order.
        """
        if word:
            self.byproducts[node] = tuple(word) + self.byproduct(node)

    def copy(self) -> "GraphState":
        """Deep copy"""
        return GraphState(
            adjacency={node: set(nbrs) for node, nbrs in self.adjacency.items()},
            basis=dict(self.basis),
            byproducts=dict(self.byproducts),
            roles=dict(self.roles),
            next_id=self.next_id,
        )

    def to_networkx(self) -> nx.Graph:
        """networkx view (nodes carry their role)"""
        graph = nx.Graph()
        for node in sorted(self.adjacency):
            graph.add_node(node, role=self.roles.get(node, NodeRole.UNASSIGNED).value)
        graph.add_edges_from(self.edges())
        return graph


def lc_byproducts(graph: GraphState, v: int) -> Dict[int, ByproductWord]:
    """Per-qubit generators of U_v(G) = exp(-i pi/4 X_v) prod_u exp(i pi/4 Z_u)."""
    words: Dict[int, ByproductWord] = {v: (Generator.X_MINUS,)}
    for u in graph.neighbors(v):
        words[u] = (Generator.Z_PLUS,)
    return words


def local_complement(graph: GraphState, v: int) -> GraphState:
    """Toggle every edge among the neighbors of v."""
    graph.require(v)
    result = graph.copy()
    neighborhood = sorted(graph.neighbors(v))
    for i, a in enumerate(neighborhood):
        for b in neighborhood[i + 1 :]:
            result.toggle_edge(a, b)
    return result


def measure_z(graph: GraphState, v: int, outcome: int = 0) -> GraphState:
    """Remove v and its edges.

    Outcome 1 leaves a Pauli Z on every former neighbor; outcome 0 leaves
    the other byproducts untouched.
    """
    graph.require(v)
    result = graph.copy()
    former = sorted(graph.neighbors(v))
    result.remove_node(v)
    if outcome:
        for u in former:
            result.record(u, PAULI_Z_WORD)
    return result


def _check_fusion_pair(graph: GraphState, q1: int, q2: int) -> None:
    graph.require(q1, q2)
    if q1 == q2:
        raise GraphRewriteError(f"cannot fuse node {q1} with itself")
    if graph.has_edge(q1, q2):
        raise GraphRewriteError(f"fused nodes {q1} and {q2} are adjacent")


def fuse_success(
    graph: GraphState, q1: int, q2: int, outcomes: Tuple[int, int] = (0, 0)
) -> GraphState:
    """Successful XZ/ZX fusion of q1 and q2.

    Every pair (u, w) with u in N(q1), w in N(q2) gets its edge toggled, both
    photons are consumed, and nodes whose stabilizer sign flips for the given
    outcome bits receive a Pauli Z.
    """
    _check_fusion_pair(graph, q1, q2)
    s1, s2 = outcomes
    n1, n2 = graph.neighbors(q1), graph.neighbors(q2)
    shared = n1 & n2
    result = graph.copy()
    result.remove_node(q1)
    result.remove_node(q2)
    for u in sorted(n1):
        for w in sorted(n2):
            if u != w:
                result.toggle_edge(u, w)
    for u in sorted(n1 - shared):
        if s2:
            result.record(u, PAULI_Z_WORD)
    for w in sorted(n2 - shared):
        if s1:
            result.record(w, PAULI_Z_WORD)
    for c in sorted(shared):
        if s1 == s2:
            result.record(c, PAULI_Z_WORD)
    return result


def fuse_fail(
    graph: GraphState, q1: int, q2: int, outcomes: Tuple[int, int] = (0, 0)
) -> GraphState:
    """Failed fusion: both photons are lost.

    A fused qubit of degree >= 2 is removed after local complementation and
    leaves U_Z- (outcome 0) or U_Z+ (outcome 1) on each former neighbor; a
    qubit of degree <= 1 is simply Z-removed.
    """
    _check_fusion_pair(graph, q1, q2)
    result = graph.copy()
    for q, outcome in zip((q1, q2), outcomes):
        if result.degree(q) >= 2:
            former = sorted(result.neighbors(q))
            result = local_complement(result, q)
            result.remove_node(q)
            word = (Generator.Z_PLUS,) if outcome else (Generator.Z_MINUS,)
            for u in former:
                result.record(u, word)
        else:
            result = measure_z(result, q, outcome)
    return result


def propagate_through_measurement(
    word: ByproductWord, basis: MeasurementBasis
) -> Tuple[MeasurementBasis, ByproductWord]:
    """Adjusted basis b' with M_b U = U M_b'; the word is returned for deferral."""
    adjusted = basis
    for generator in reversed(word):
        if not isinstance(generator, Generator):
            raise UnsupportedBasisError(f"unknown generator {generator!r}")
        adjusted = adjusted.conjugated(generator)
    return adjusted, word


def propagate_through_fusion(
    word1: ByproductWord, word2: ByproductWord, fusion: FusionBasis
) -> FusionBasis:
    """Adjusted fusion basis for pending words on the two fused qubits."""
    adjusted = []
    for product in fusion.products():
        for qubit, word in ((0, word1), (1, word2)):
            for generator in reversed(word):
                if not isinstance(generator, Generator):
                    raise UnsupportedBasisError(f"unknown generator {generator!r}")
                product = product.conjugated(generator, qubit)
        adjusted.append(product)
    return FusionBasis(adjusted[0], adjusted[1])


def make_star(k: int) -> GraphState:
    """Star resource state with one root (lowest id) and k-1 leaves."""
    if k < 2:
        raise GraphRewriteError(f"star needs at least 2 qubits, got {k}")
    graph = GraphState()
    root = graph.add_node(NodeRole.ROOT)
    for _ in range(k - 1):
        leaf = graph.add_node(NodeRole.LEAF)
        graph.add_edge(root, leaf)
    return graph


def write_graph_text(graph: GraphState) -> str:
    """Edge-list text: node count, `u v` lines, then `---` and annotations.

    Nodes are relabeled 0..n-1 in increasing id order.
    """
    order = sorted(graph.nodes)
    index = {node: i for i, node in enumerate(order)}
    lines = [str(len(order))]
    lines += [f"{index[u]} {index[v]}" for u, v in graph.edges()]
    lines.append("---")
    for node in order:
        role = graph.roles.get(node, NodeRole.UNASSIGNED).value
        basis = graph.basis.get(node)
        if basis is None:
            lines.append(f"{index[node]} {role}")
        else:
            plane = basis.plane[0].value + basis.plane[1].value
            lines.append(f"{index[node]} {role} {plane} {basis.angle:.12f}")
    return "\n".join(lines) + "\n"


def read_graph_text(text: str) -> GraphState:
    """Inverse of write_graph_text"""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise GraphRewriteError("empty graph file")
    try:
        count = int(lines[0])
    except ValueError as e:
        raise GraphRewriteError(f"bad node count {lines[0]!r}") from e
    graph = GraphState.from_edges(count, [])
    annotations = False
    for line in lines[1:]:
        if line == "---":
            annotations = True
            continue
        fields = line.split()
        try:
            if not annotations:
                graph.add_edge(int(fields[0]), int(fields[1]))
                continue
            node = int(fields[0])
            graph.require(node)
            graph.roles[node] = NodeRole(fields[1])
            if len(fields) == 4:
                plane = (Pauli(fields[2][0]), Pauli(fields[2][1]))
                graph.basis[node] = MeasurementBasis(plane, float(fields[3]))
        except (IndexError, ValueError) as e:
            raise GraphRewriteError(f"bad graph line {line!r}: {e}") from e
    return graph
