# -*- coding: utf-8 -*-
"""Circuits in the {J, CZ} gate set and their measurement patterns.

A J(alpha) gate appends a fresh node on its wire and gives the previous
frontier node the equatorial basis E(alpha); a CZ links the two current
frontier nodes. Measuring E(alpha) with X-feed-forward implements
J(-alpha) = conj(J(alpha)), so a pattern reproduces the circuit's output
distribution exactly and its output state up to complex conjugation.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Set, Tuple, Union

import networkx as nx

from src.errors import CircuitFormatError
from src.graphstate import (
    GraphState,
    MeasurementBasis,
    NodeRole,
    Pauli,
    normalize_angle,
)


@dataclass(frozen=True)
class JGate:
    """J(angle) = H diag(1, e^{i angle}) on one wire"""

    wire: int
    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "angle", normalize_angle(float(self.angle)))


@dataclass(frozen=True)
class CZGate:
    """Controlled-Z between two wires"""

    a: int
    b: int


Gate = Union[JGate, CZGate]


@dataclass
class Circuit:
    """Ordered gate list over qubit_count wires"""

    qubit_count: int
    gates: List[Gate] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.qubit_count < 0:
            raise CircuitFormatError(f"negative qubit count {self.qubit_count}")
        for gate in self.gates:
            self._check(gate)

    def _check(self, gate: Gate) -> None:
        wires = (gate.wire,) if isinstance(gate, JGate) else (gate.a, gate.b)
        for wire in wires:
            if not 0 <= wire < self.qubit_count:
                raise CircuitFormatError(
                    f"wire {wire} out of range for {self.qubit_count} qubits"
                )
        if isinstance(gate, CZGate) and gate.a == gate.b:
            raise CircuitFormatError(f"CZ needs two distinct wires, got {gate.a}")

    def append(self, gate: Gate) -> "Circuit":
        """Append a validated gate"""
        self._check(gate)
        self.gates.append(gate)
        return self

    def j(self, wire: int, angle: float) -> "Circuit":
        """Append J(angle) on wire"""
        return self.append(JGate(wire, angle))

    def cz(self, a: int, b: int) -> "Circuit":
        """Append CZ(a, b)"""
        return self.append(CZGate(a, b))

    @property
    def j_count(self) -> int:
        """Number of J gates"""
        return sum(1 for gate in self.gates if isinstance(gate, JGate))

    @property
    def cz_count(self) -> int:
        """Number of CZ gates"""
        return sum(1 for gate in self.gates if isinstance(gate, CZGate))


@dataclass
class MeasurementPattern:
    """Program graph state plus per-node bases and the wire flow.

    flow maps every measured node to its successor on the same wire.
    """

    graph: GraphState
    node_basis: Dict[int, MeasurementBasis]
    inputs: List[int]
    outputs: List[int]
    flow: Dict[int, int] = field(default_factory=dict)
    wire_of: Dict[int, int] = field(default_factory=dict)

    @property
    def measured(self) -> List[int]:
        """Nodes that carry a basis"""
        return sorted(self.node_basis)

    def edges(self) -> List[Tuple[int, int]]:
        """Program graph edges"""
        return self.graph.edges()


@dataclass
class DependencyDag:
    """Must-measure-before constraints between pattern nodes"""

    graph: nx.DiGraph

    def predecessors(self, node: int) -> List[int]:
        """Direct predecessors"""
        return sorted(self.graph.predecessors(node))

    def front_layer(self, done: Set[int]) -> List[int]:
        """Nodes not in done whose predecessors are all in done"""
        return sorted(
            node
            for node in self.graph.nodes
            if node not in done
            and all(p in done for p in self.graph.predecessors(node))
        )

    def sources(self) -> List[int]:
        """Nodes without predecessors"""
        return self.front_layer(set())

    def topological_order(self) -> List[int]:
        """Deterministic topological order"""
        return list(nx.lexicographical_topological_sort(self.graph))


def translate_circuit(circuit: Circuit) -> MeasurementPattern:
    """Measurement pattern of a {J, CZ} circuit."""
    graph = GraphState()
    frontier = [graph.add_node(NodeRole.PROGRAM) for _ in range(circuit.qubit_count)]
    inputs = list(frontier)
    node_basis: Dict[int, MeasurementBasis] = {}
    flow: Dict[int, int] = {}
    wire_of = {node: wire for wire, node in enumerate(frontier)}
    for gate in circuit.gates:
        if isinstance(gate, JGate):
            previous = frontier[gate.wire]
            fresh = graph.add_node(NodeRole.PROGRAM)
            graph.add_edge(previous, fresh)
            basis = MeasurementBasis.equatorial(gate.angle)
            graph.basis[previous] = basis
            node_basis[previous] = basis
            flow[previous] = fresh
            wire_of[fresh] = gate.wire
            frontier[gate.wire] = fresh
        else:
            graph.toggle_edge(frontier[gate.a], frontier[gate.b])
    return MeasurementPattern(
        graph=graph,
        node_basis=node_basis,
        inputs=inputs,
        outputs=list(frontier),
        flow=flow,
        wire_of=wire_of,
    )


def dependency_dag(pattern: MeasurementPattern) -> DependencyDag:
    """Wire-order DAG: u -> v iff u immediately precedes v on one wire."""
    dag = nx.DiGraph()
    dag.add_nodes_from(sorted(pattern.graph.nodes))
    dag.add_edges_from(sorted(pattern.flow.items()))
    return DependencyDag(dag)


def measurement_order(pattern: MeasurementPattern) -> List[int]:
    """Measured nodes sorted by the id of their flow successor.

    Successor ids grow with circuit time, so every node of a t-domain is
    measured before the node it corrects.
    """
    return sorted(pattern.flow, key=lambda node: (pattern.flow[node], node))


def feed_forward_domains(
    pattern: MeasurementPattern,
) -> Tuple[Dict[int, Set[int]], Dict[int, Set[int]]]:
    """(s-domains, t-domains) for every node of the pattern.

    Outcome s_i leaves X on f(i) and Z on N(f(i)) minus i.
    """
    s_domain: Dict[int, Set[int]] = {node: set() for node in pattern.graph.nodes}
    t_domain: Dict[int, Set[int]] = {node: set() for node in pattern.graph.nodes}
    for node, successor in pattern.flow.items():
        s_domain[successor].add(node)
        for neighbor in pattern.graph.neighbors(successor):
            if neighbor != node:
                t_domain[neighbor].add(node)
    return s_domain, t_domain


def adjusted_angle(alpha: float, s: int, t: int) -> float:
    """(-1)^s alpha + t pi"""
    return normalize_angle((-1) ** (s % 2) * alpha + (t % 2) * math.pi)


def equatorial_angle(basis: MeasurementBasis) -> float:
    """Angle of an XY-plane basis"""
    if basis.plane != (Pauli.X, Pauli.Y):
        raise CircuitFormatError(f"pattern basis {basis} is not equatorial")
    return basis.angle


def limit_cz_degree(circuit: Circuit, max_cz: int = 2) -> Circuit:
    """Insert identity pairs J(0) J(0) so no pattern node carries more than max_cz CZs.

    Each pair moves the wire onto a fresh node.
    """
    if max_cz < 1:
        raise CircuitFormatError(f"max_cz must be >= 1, got {max_cz}")
    result = Circuit(circuit.qubit_count)
    load = [0] * circuit.qubit_count
    for gate in circuit.gates:
        if isinstance(gate, JGate):
            result.append(gate)
            load[gate.wire] = 0
            continue
        for wire in (gate.a, gate.b):
            if load[wire] >= max_cz:
                result.j(wire, 0.0).j(wire, 0.0)
                load[wire] = 0
        result.append(gate)
        load[gate.a] += 1
        load[gate.b] += 1
    return result


def parse_circuit(text: str) -> Circuit:
    """Read the `qubits n` / `J w angle` / `CZ a b` text format."""
    circuit = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if circuit is None:
                if fields[0] != "qubits" or len(fields) != 2:
                    raise CircuitFormatError("expected header `qubits <n>`")
                circuit = Circuit(int(fields[1]))
            elif fields[0] == "J" and len(fields) == 3:
                circuit.j(int(fields[1]), float(fields[2]))
            elif fields[0] == "CZ" and len(fields) == 3:
                circuit.cz(int(fields[1]), int(fields[2]))
            else:
                raise CircuitFormatError(f"unknown gate {line!r}")
        except (ValueError, CircuitFormatError) as e:
            raise CircuitFormatError(f"line {number}: {e}") from e
    return circuit if circuit is not None else Circuit(0)


def write_circuit(circuit: Circuit) -> str:
    """Text form accepted by parse_circuit"""
    lines = [f"qubits {circuit.qubit_count}"]
    for gate in circuit.gates:
        if isinstance(gate, JGate):
            lines.append(f"J {gate.wire} {gate.angle!r}")
        else:
            lines.append(f"CZ {gate.a} {gate.b}")
    return "\n".join(lines) + "\n"


def load_circuit(path: Path) -> Circuit:
    """Read a circuit file"""
    return parse_circuit(Path(path).read_text(encoding="utf-8"))
