# -*- coding: utf-8 -*-
"""FlexLattice IR: layers of virtual 2D lattices joined by temporal edges.

A temporal edge joins the same (x, y) on two layers. Edges spanning two or
more layers are backed by a store at the lower node and a retrieve one layer
below the upper node; sites the IR never mentions are Z-measured.
"""

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    Literal,
    NamedTuple,
    Optional,
    Set,
    Tuple,
    Union,
)

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.errors import ConfigError, InvalidIRError, ProgramSyntaxError

SCHEMA_VERSION = 1

Column = Tuple[int, int]


class Coord(NamedTuple):
    """Virtual-hardware site (x, y, layer)"""

    x: int
    y: int
    layer: int

    @property
    def column(self) -> Column:
        """(x, y) ignoring the layer"""
        return (self.x, self.y)

    def at(self, layer: int) -> "Coord":
        """Same column on another layer"""
        return Coord(self.x, self.y, layer)

    def __str__(self) -> str:
        return f"({self.x}, {self.y}, {self.layer})"


SpatialEdge = Tuple[Column, Column, int]
TemporalEdge = Tuple[Column, int, int]


class VirtualHardwareConfig(BaseModel):
    """Size of one virtual layer and the virtual memory limits"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    width: int = Field(2, ge=1)
    height: int = Field(2, ge=1)
    memory_per_site: Optional[int] = Field(None, ge=1)
    photon_lifetime_cycles: int = Field(5000, gt=0)

    def contains(self, coord: Coord) -> bool:
        """Inside the layer bounds"""
        return 0 <= coord.x < self.width and 0 <= coord.y < self.height and (
            coord.layer >= 0
        )


class NodeKind(str, Enum):
    """What a virtual node holds"""

    MAPPED = "mapped"
    ANCILLA = "ancilla"
    UNUSED = "unused"
    STORED = "stored"


@dataclass(frozen=True)
class VNode:
    """One declared virtual node"""

    coord: Coord
    kind: NodeKind
    g_node: Optional[int] = None


@dataclass(frozen=True, order=True)
class MemoryEvent:
    """Store at the edge's lower node or retrieve one layer below its upper node"""

    kind: str
    coord: Coord
    edge: TemporalEdge


@dataclass(frozen=True)
class Violation:
    """Machine-readable validation failure"""

    code: str
    message: str
    coord: Optional[Coord] = None

    def __str__(self) -> str:
        where = f" at {self.coord}" if self.coord is not None else ""
        return f"{self.code}{where}: {self.message}"


def spatial_edge(a: Coord, b: Coord) -> SpatialEdge:
    """Canonical spatial edge between two sites of one layer"""
    low, high = sorted((a.column, b.column))
    return (low, high, a.layer)


@dataclass
class FlexLatticeIR:
    """Declared nodes plus enabled spatial and temporal edges"""

    config: VirtualHardwareConfig
    nodes: Dict[Coord, VNode] = field(default_factory=dict)
    spatial_edges: Set[SpatialEdge] = field(default_factory=set)
    temporal_edges: Set[TemporalEdge] = field(default_factory=set)
    memory_events: Set[MemoryEvent] = field(default_factory=set)

    def map_node(self, coord: Coord, g_node: int) -> VNode:
        """Declare a program node"""
        node = VNode(Coord(*coord), NodeKind.MAPPED, g_node)
        self.nodes[node.coord] = node
        return node

    def add_ancilla(self, coord: Coord) -> VNode:
        """Declare a wire node"""
        node = VNode(Coord(*coord), NodeKind.ANCILLA)
        self.nodes[node.coord] = node
        return node

    def add_spatial_edge(self, a: Coord, b: Coord) -> SpatialEdge:
        """Enable an in-layer edge"""
        if a.layer != b.layer:
            raise ValueError(f"spatial edge {a}-{b} crosses layers")
        edge = spatial_edge(a, b)
        self.spatial_edges.add(edge)
        return edge

    def add_temporal_edge(self, lower: Coord, upper: Coord) -> TemporalEdge:
        """Enable a temporal edge, with store/retrieve when it skips layers"""
        if lower.column != upper.column or lower.layer >= upper.layer:
            raise ValueError(f"temporal edge {lower}-{upper} is not vertical")
        edge = (lower.column, lower.layer, upper.layer)
        self.temporal_edges.add(edge)
        if upper.layer - lower.layer >= 2:
            self.memory_events.add(MemoryEvent("store", Coord(*lower), edge))
            retrieve = upper.at(upper.layer - 1)
            self.memory_events.add(MemoryEvent("retrieve", retrieve, edge))
        return edge

    @property
    def layer_count(self) -> int:
        """Layers up to the highest one holding content"""
        top = [c.layer for c in self.nodes]
        top += [e[2] for e in self.spatial_edges]
        top += [e[2] for e in self.temporal_edges]
        return max(top) + 1 if top else 0

    def layer_grid(self, layer: int) -> List[List[VNode]]:
        """Rows (y) of sites (x); undeclared retrieve targets show as stored"""
        retrieved = {
            m.coord for m in self.memory_events if m.kind == "retrieve"
        }
        grid = []
        for y in range(self.config.height):
            row = []
            for x in range(self.config.width):
                coord = Coord(x, y, layer)
                if coord in self.nodes:
                    row.append(self.nodes[coord])
                elif coord in retrieved:
                    row.append(VNode(coord, NodeKind.STORED))
                else:
                    row.append(VNode(coord, NodeKind.UNUSED))
            grid.append(row)
        return grid

    @property
    def layers(self) -> List[List[List[VNode]]]:
        """Every layer grid in order"""
        return [self.layer_grid(layer) for layer in range(self.layer_count)]

    def g_nodes(self) -> Dict[int, Coord]:
        """Program node -> its site"""
        return {
            node.g_node: coord
            for coord, node in self.nodes.items()
            if node.kind is NodeKind.MAPPED and node.g_node is not None
        }

    def temporal_out(self, coord: Coord) -> Optional[Coord]:
        """Upper end of the temporal edge leaving coord"""
        for column, low, high in self.temporal_edges:
            if column == coord.column and low == coord.layer:
                return coord.at(high)
        return None


def validate_ir(
    ir: FlexLatticeIR, expected_g_nodes: Optional[Iterable[int]] = None
) -> List[Violation]:
    """Every broken IR invariant; an empty list means valid."""
    config = ir.config
    found: List[Violation] = []

    for coord in sorted(ir.nodes):
        if not config.contains(coord):
            found.append(Violation("coord-range", "outside the virtual layer", coord))

    for a, b, layer in sorted(ir.spatial_edges):
        ends = (Coord(*a, layer), Coord(*b, layer))
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            found.append(
                Violation("spatial-nonadjacent", f"{a} and {b} not 4-adjacent", ends[0])
            )
        for end in ends:
            if end not in ir.nodes:
                found.append(Violation("spatial-endpoint", "undeclared endpoint", end))

    in_degree: Counter = Counter()
    out_degree: Counter = Counter()
    for column, low, high in sorted(ir.temporal_edges):
        lower, upper = Coord(*column, low), Coord(*column, high)
        if low >= high:
            found.append(Violation("temporal-endpoint", "edge runs downward", lower))
            continue
        for end in (lower, upper):
            if end not in ir.nodes:
                found.append(Violation("temporal-endpoint", "undeclared endpoint", end))
        out_degree[lower] += 1
        in_degree[upper] += 1
        if high - low >= 2:
            edge = (column, low, high)
            store = MemoryEvent("store", lower, edge)
            retrieve = MemoryEvent("retrieve", upper.at(high - 1), edge)
            if store not in ir.memory_events or retrieve not in ir.memory_events:
                found.append(
                    Violation(
                        "unbacked-cross-layer",
                        f"edge {low}->{high} lacks store/retrieve",
                        lower,
                    )
                )
    for coord, count in sorted(in_degree.items()):
        if count > 1:
            found.append(
                Violation("temporal-in-degree", f"{count} edges from below", coord)
            )
    for coord, count in sorted(out_degree.items()):
        if count > 1:
            found.append(
                Violation("temporal-out-degree", f"{count} edges upward", coord)
            )

    for event in sorted(ir.memory_events):
        column, low, high = event.edge
        expected = Coord(*column, low if event.kind == "store" else high - 1)
        if (
            event.edge not in ir.temporal_edges
            or high - low < 2
            or event.coord != expected
        ):
            found.append(
                Violation(
                    "orphan-memory-event", f"{event.kind} without its edge", event.coord
                )
            )

    seen: Dict[int, Coord] = {}
    for coord in sorted(ir.nodes):
        node = ir.nodes[coord]
        if node.kind is not NodeKind.MAPPED:
            continue
        if node.g_node in seen:
            found.append(
                Violation(
                    "duplicate-g-node",
                    f"g{node.g_node} also mapped at {seen[node.g_node]}",
                    coord,
                )
            )
        else:
            seen[node.g_node] = coord
    if expected_g_nodes is not None:
        for g in sorted(set(expected_g_nodes) - set(seen)):
            found.append(Violation("missing-g-node", f"g{g} is never mapped"))

    if config.memory_per_site is not None:
        held: Counter = Counter()
        for column, low, high in ir.temporal_edges:
            for layer in range(low + 1, high):
                held[Coord(*column, layer)] += 1
        for coord, count in sorted(held.items()):
            if count > config.memory_per_site:
                found.append(
                    Violation(
                        "memory-capacity",
                        f"{count} stored nodes exceed {config.memory_per_site}",
                        coord,
                    )
                )
    return found


class Opcode(str, Enum):
    """Instruction names as written in program text"""

    MAP = "map_v_node"
    ANCILLA = "make_v_node_ancilla"
    STORE = "store_v_node"
    RETRIEVE = "retrieve_v_node"
    SPATIAL = "enable_spatial_v_edge"
    TEMPORAL = "enable_temporal_v_edge"


@dataclass(frozen=True)
class Instruction:
    """One instruction; operand is a g-node id or a second coordinate"""

    opcode: Opcode
    v: Coord
    operand: Union[int, Coord, None] = None

    @property
    def layer(self) -> int:
        """Layer group the instruction belongs to"""
        if self.opcode is Opcode.RETRIEVE:
            assert isinstance(self.operand, Coord)
            return self.operand.layer
        return self.v.layer

    def __str__(self) -> str:
        if self.opcode is Opcode.MAP:
            return f"{self.opcode.value}({self.v}, g{self.operand})"
        if self.operand is None:
            return f"{self.opcode.value}({self.v})"
        return f"{self.opcode.value}({self.v}, {self.operand})"


@dataclass
class InstructionProgram:
    """Instructions in emission order"""

    instructions: List[Instruction] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self) -> Iterator[Instruction]:
        return iter(self.instructions)

    def layers(self) -> Dict[int, List[Instruction]]:
        """Instructions grouped by layer, in order"""
        groups: Dict[int, List[Instruction]] = defaultdict(list)
        for instruction in self.instructions:
            groups[instruction.layer].append(instruction)
        return dict(groups)

    def opcode_counts(self) -> Dict[str, int]:
        """Number of instructions per opcode name"""
        return dict(Counter(i.opcode.value for i in self.instructions))


_EMIT_RANK = {
    Opcode.MAP: 0,
    Opcode.ANCILLA: 0,
    Opcode.STORE: 1,
    Opcode.RETRIEVE: 2,
    Opcode.SPATIAL: 3,
    Opcode.TEMPORAL: 4,
}


def emit_instructions(ir: FlexLatticeIR) -> InstructionProgram:
    """Deterministic instruction program of a valid IR.

    Each layer emits declarations, stores, retrieves, spatial enables and
    then the temporal enables into the next layer, every group in row-major
    order. A cross-layer edge m -> n becomes store at m, retrieve at n-1 and
    a temporal enable (n-1) -> n.
    """
    violations = validate_ir(ir)
    if violations:
        raise InvalidIRError(violations)
    by_layer: Dict[int, List[Instruction]] = defaultdict(list)

    for coord in sorted(ir.nodes, key=lambda c: (c.layer, c.y, c.x)):
        node = ir.nodes[coord]
        if node.kind is NodeKind.MAPPED:
            by_layer[coord.layer].append(Instruction(Opcode.MAP, coord, node.g_node))
        elif node.kind is NodeKind.ANCILLA:
            by_layer[coord.layer].append(Instruction(Opcode.ANCILLA, coord))

    def event_key(event: MemoryEvent) -> Tuple[int, int, int]:
        return (event.coord.layer, event.coord.y, event.coord.x)

    events = sorted(ir.memory_events, key=event_key)
    for event in events:
        if event.kind == "store":
            by_layer[event.coord.layer].append(Instruction(Opcode.STORE, event.coord))
    for event in events:
        if event.kind == "retrieve":
            column, low, _ = event.edge
            origin = Coord(*column, low)
            by_layer[event.coord.layer].append(
                Instruction(Opcode.RETRIEVE, origin, event.coord)
            )

    def spatial_key(e: SpatialEdge) -> Tuple[int, Column, Column]:
        return (e[2], e[0][::-1], e[1][::-1])

    for a, b, layer in sorted(ir.spatial_edges, key=spatial_key):
        by_layer[layer].append(
            Instruction(Opcode.SPATIAL, Coord(*a, layer), Coord(*b, layer))
        )

    for column, _, high in sorted(ir.temporal_edges, key=lambda e: (e[2], e[0][::-1])):
        below = Coord(*column, high - 1)
        by_layer[below.layer].append(
            Instruction(Opcode.TEMPORAL, below, Coord(*column, high))
        )

    ordered: List[Instruction] = []
    for layer in sorted(by_layer):
        ordered.extend(sorted(by_layer[layer], key=lambda i: _EMIT_RANK[i.opcode]))
    return InstructionProgram(ordered)


_COORD = r"\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)"
_PATTERNS = {
    Opcode.MAP: re.compile(rf"map_v_node\(\s*{_COORD}\s*,\s*g?(\d+)\s*\)"),
    Opcode.ANCILLA: re.compile(rf"make_v_node_ancilla\(\s*{_COORD}\s*\)"),
    Opcode.STORE: re.compile(rf"store_v_node\(\s*{_COORD}\s*\)"),
    Opcode.RETRIEVE: re.compile(rf"retrieve_v_node\(\s*{_COORD}\s*,\s*{_COORD}\s*\)"),
    Opcode.SPATIAL: re.compile(
        rf"enable_spatial_v_edge\(\s*{_COORD}\s*,\s*{_COORD}\s*\)"
    ),
    Opcode.TEMPORAL: re.compile(
        rf"enable_temporal_v_edge\(\s*{_COORD}\s*,\s*{_COORD}\s*\)"
    ),
}


def _parse_line(line: str, number: int) -> Instruction:
    name = line.split("(", 1)[0].strip()
    try:
        opcode = Opcode(name)
    except ValueError as e:
        raise ProgramSyntaxError(number, f"unknown instruction {name!r}") from e
    match = _PATTERNS[opcode].fullmatch(line)
    if match is None:
        raise ProgramSyntaxError(number, f"malformed operands for {name}")
    values = [int(v) for v in match.groups()]
    v = Coord(*values[:3])
    if opcode is Opcode.MAP:
        return Instruction(opcode, v, values[3])
    if len(values) == 6:
        return Instruction(opcode, v, Coord(*values[3:]))
    return Instruction(opcode, v)


def parse_program(text: str) -> InstructionProgram:
    """Read one `name(args)` per line; blanks, `#` comments and `...` are skipped."""
    instructions = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line == "...":
            continue
        instructions.append(_parse_line(line, number))
    return InstructionProgram(instructions)


def serialize_program(program: InstructionProgram) -> str:
    """Canonical text, one instruction per line"""
    return "".join(f"{instruction}\n" for instruction in program.instructions)


def replay_program(
    program: InstructionProgram, config: VirtualHardwareConfig
) -> FlexLatticeIR:
    """Rebuild the IR an instruction program describes.

    Errors are reported against the 1-based instruction position.
    """
    ir = FlexLatticeIR(config)
    stored: Set[Coord] = set()
    retrieved: Dict[Coord, Coord] = {}
    for position, instruction in enumerate(program.instructions, start=1):
        v, operand = instruction.v, instruction.operand
        if instruction.opcode in (Opcode.MAP, Opcode.ANCILLA):
            if v in ir.nodes:
                raise ProgramSyntaxError(position, f"{v} declared twice")
            if instruction.opcode is Opcode.MAP:
                assert isinstance(operand, int)
                ir.map_node(v, operand)
            else:
                ir.add_ancilla(v)
        elif instruction.opcode is Opcode.STORE:
            if v not in ir.nodes:
                raise ProgramSyntaxError(position, f"store of undeclared {v}")
            stored.add(v)
        elif instruction.opcode is Opcode.RETRIEVE:
            assert isinstance(operand, Coord)
            if v not in stored:
                raise ProgramSyntaxError(position, f"retrieve of unstored {v}")
            if operand.column != v.column or operand.layer <= v.layer:
                raise ProgramSyntaxError(position, f"cannot retrieve {v} at {operand}")
            stored.discard(v)
            retrieved[operand] = v
        elif instruction.opcode is Opcode.SPATIAL:
            assert isinstance(operand, Coord)
            if operand.layer != v.layer:
                raise ProgramSyntaxError(position, "spatial edge crosses layers")
            ir.add_spatial_edge(v, operand)
        else:
            assert isinstance(operand, Coord)
            lower = retrieved.pop(v, v)
            if operand.column != v.column or operand.layer != v.layer + 1:
                raise ProgramSyntaxError(position, f"{v} -> {operand} skips layers")
            ir.add_temporal_edge(lower, operand)
    if stored or retrieved:
        pending = sorted(stored | set(retrieved.values()))
        raise ProgramSyntaxError(
            len(program.instructions), f"memory events never completed: {pending}"
        )
    return ir


def write_program(program: InstructionProgram, path: Path) -> None:
    """Write program text"""
    Path(path).write_text(serialize_program(program), encoding="utf-8")


def load_program(path: Path) -> InstructionProgram:
    """Read program text"""
    return parse_program(Path(path).read_text(encoding="utf-8"))


class _NodeRecord(BaseModel):
    coord: Tuple[int, int, int]
    kind: Literal["mapped", "ancilla"]
    g_node: Optional[int] = None


class _MemoryRecord(BaseModel):
    kind: Literal["store", "retrieve"]
    coord: Tuple[int, int, int]
    edge: Tuple[Tuple[int, int], int, int]


class IRDocument(BaseModel):
    """On-disk form of a FlexLatticeIR"""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    config: VirtualHardwareConfig
    nodes: List[_NodeRecord]
    spatial_edges: List[Tuple[Tuple[int, int], Tuple[int, int], int]]
    temporal_edges: List[Tuple[Tuple[int, int], int, int]]
    memory_events: List[_MemoryRecord]


def ir_to_json(ir: FlexLatticeIR) -> str:
    """Deterministic JSON document"""
    document = IRDocument(
        config=ir.config,
        nodes=[
            _NodeRecord(coord=c, kind=node.kind.value, g_node=node.g_node)
            for c, node in sorted(ir.nodes.items())
        ],
        spatial_edges=sorted(ir.spatial_edges),
        temporal_edges=sorted(ir.temporal_edges),
        memory_events=[
            _MemoryRecord(kind=m.kind, coord=m.coord, edge=m.edge)
            for m in sorted(ir.memory_events)
        ],
    )
    return document.model_dump_json(indent=2)


def ir_from_json(text: str) -> FlexLatticeIR:
    """Inverse of ir_to_json"""
    try:
        document = IRDocument.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"invalid IR document: {e}") from e
    ir = FlexLatticeIR(document.config)
    for record in document.nodes:
        coord = Coord(*record.coord)
        if record.kind == "mapped":
            if record.g_node is None:
                raise ConfigError(f"mapped node {coord} has no g_node")
            ir.map_node(coord, record.g_node)
        else:
            ir.add_ancilla(coord)
    ir.spatial_edges = set(document.spatial_edges)
    ir.temporal_edges = set(document.temporal_edges)
    ir.memory_events = {
        MemoryEvent(m.kind, Coord(*m.coord), m.edge) for m in document.memory_events
    }
    return ir


@dataclass
class Contraction:
    """Program graph read back from the IR"""

    graph: nx.Graph
    violations: List[Violation]

    @property
    def ok(self) -> bool:
        """No contraction problems"""
        return not self.violations


def site_graph(ir: FlexLatticeIR) -> nx.Graph:
    """Declared sites joined by spatial and temporal edges"""
    sites = nx.Graph()
    sites.add_nodes_from(ir.nodes)
    for a, b, layer in ir.spatial_edges:
        sites.add_edge(Coord(*a, layer), Coord(*b, layer))
    for column, low, high in ir.temporal_edges:
        sites.add_edge(Coord(*column, low), Coord(*column, high))
    return sites


def contract_ancillas(ir: FlexLatticeIR) -> Contraction:
    """Collapse ancilla components into program edges.

    A component entered from below by a mapped node's temporal edge is a relay
    of that node and links it to every other mapped node it touches; any other
    component is a wire and must touch exactly two mapped nodes.
    """
    sites = site_graph(ir)
    kind = {c: n.kind for c, n in ir.nodes.items()}
    g_of = {c: n.g_node for c, n in ir.nodes.items() if n.kind is NodeKind.MAPPED}
    graph = nx.Graph()
    graph.add_nodes_from(sorted(g_of.values()))
    violations: List[Violation] = []

    def link(u: int, v: int, where: Coord) -> None:
        if u == v:
            violations.append(Violation("self-loop", f"g{u} reaches itself", where))
        elif graph.has_edge(u, v):
            violations.append(
                Violation("duplicate-edge", f"g{u}-g{v} realized twice", where)
            )
        else:
            graph.add_edge(u, v)

    for a, b in sorted(tuple(sorted(e)) for e in sites.edges):
        if a in g_of and b in g_of:
            link(g_of[a], g_of[b], a)

    ancillas = [c for c in sites if kind.get(c) is NodeKind.ANCILLA]
    components = sorted(nx.connected_components(sites.subgraph(ancillas)), key=min)
    for component in components:
        anchor = min(component)
        owners: Set[Coord] = set()
        touches: List[Coord] = []
        for site in sorted(component):
            for other in sorted(sites.neighbors(site)):
                if other not in g_of:
                    continue
                if other.column == site.column and other.layer < site.layer:
                    owners.add(other)
                else:
                    touches.append(other)
        if len(owners) > 1:
            names = sorted(g_of[o] for o in owners)
            violations.append(
                Violation("relay-multi-owner", f"relay entered by {names}", anchor)
            )
            continue
        if owners:
            owner = g_of[owners.pop()]
            targets = [g_of[t] for t in touches]
            if not targets:
                violations.append(
                    Violation("relay-dangling", f"relay of g{owner} is unused", anchor)
                )
            for target in targets:
                link(owner, target, anchor)
            continue
        ends = [g_of[t] for t in touches]
        if len(ends) == 2:
            link(ends[0], ends[1], anchor)
        elif len(ends) < 2:
            violations.append(Violation("wire-dangling", f"touches {ends}", anchor))
        else:
            violations.append(Violation("wire-branching", f"touches {ends}", anchor))
    return Contraction(graph, violations)
