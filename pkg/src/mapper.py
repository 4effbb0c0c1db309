# -*- coding: utf-8 -*-
"""Offline pass: place and route a measurement pattern onto virtual hardware.

Nodes are consumed from the front layer of the dependency DAG. A program
edge is realized when its second endpoint is placed, either by a wire of
ancillas on the current layer or through a relay: an ancilla column raised
from one of the earlier endpoint's ports, where a port is a site standing
for that node whose outgoing temporal edge is still free.
"""

import heapq
import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import MappingError, OccupancyDeadlockError, UnroutableEdgeError
from src.frontend import MeasurementPattern, dependency_dag
from src.ir import (
    Column,
    Coord,
    FlexLatticeIR,
    VirtualHardwareConfig,
    Violation,
    contract_ancillas,
    validate_ir,
)
from src.placement_factory import STRATEGIES, PlacementFactory

# up, right, down, left
DIRECTIONS = ((0, -1), (1, 0), (0, 1), (-1, 0))
MAX_PERMUTED_NEEDS = 4


class MapperConfig(BaseModel):
    """Knobs of the offline pass"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    vh: VirtualHardwareConfig = Field(default_factory=VirtualHardwareConfig)
    occupancy_cap: float = Field(0.25, gt=0.0, le=1.0)
    refresh_interval_layers: Optional[int] = Field(None, ge=1)
    routing_budget: Optional[int] = Field(None, ge=1)
    placement: str = "locality"
    max_stalled_layers: int = Field(32, ge=1)

    @model_validator(mode="after")
    def _known_placement(self) -> "MapperConfig":
        if self.placement not in STRATEGIES:
            raise ValueError(
                f"unknown placement {self.placement!r}, "
                f"choose from {sorted(STRATEGIES)}"
            )
        return self

    @property
    def cap_count(self) -> int:
        """Incomplete program nodes allowed on one layer"""
        area = self.vh.width * self.vh.height
        return max(1, math.floor(self.occupancy_cap * area))

    @property
    def budget(self) -> int:
        """New ancilla sites allowed per routed edge"""
        return self.routing_budget or self.vh.width + self.vh.height


def _port_order(coord: Coord) -> Tuple[int, int, int]:
    return (-coord.layer, coord.y, coord.x)


@dataclass
class MappingState:
    """Everything the scheduler knows between two placements"""

    ir: FlexLatticeIR
    layer: int = 0
    placed: Dict[int, Coord] = field(default_factory=dict)
    remaining: Dict[int, Set[int]] = field(default_factory=dict)
    ports: Dict[int, List[Coord]] = field(default_factory=dict)
    owned: Dict[int, List[Coord]] = field(default_factory=dict)
    held: Counter = field(default_factory=Counter)
    layers_since_refresh: int = 0
    stalled: int = 0
    placed_on_layer: bool = False
    spread_on_layer: bool = False
    refreshes: int = 0
    spreads: int = 0
    occupancy_log: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def incomplete(self) -> Set[int]:
        """Placed nodes with program edges still to realize"""
        return {g for g, rest in self.remaining.items() if rest}

    def occupancy(self, layer: int) -> int:
        """Incomplete program nodes sitting on layer"""
        return sum(1 for g in self.incomplete if self.placed[g].layer == layer)

    @property
    def stored(self) -> Dict[int, List[Coord]]:
        """Virtual memory: ports below the current layer of incomplete nodes"""
        return {
            g: sorted(p for p in self.ports[g] if p.layer < self.layer)
            for g in sorted(self.incomplete)
        }

    def sites(self) -> Iterator[Coord]:
        """Every site of the current layer, row-major"""
        config = self.ir.config
        for y in range(config.height):
            for x in range(config.width):
                yield Coord(x, y, self.layer)

    def is_free(self, coord: Coord, reserved: Optional[Set[Coord]] = None) -> bool:
        """Inside the layer and not declared or reserved"""
        if not self.ir.config.contains(coord) or coord in self.ir.nodes:
            return False
        return reserved is None or coord not in reserved

    def memory_allows(self, lower: Coord, layer: int) -> bool:
        """A stored span from lower up to layer fits the memory cells"""
        capacity = self.ir.config.memory_per_site
        if capacity is None:
            return True
        return all(
            self.held[(lower.column, between)] < capacity
            for between in range(lower.layer + 1, layer)
        )

    def connect_up(self, lower: Coord, upper: Coord) -> None:
        """Temporal edge with its memory bookkeeping"""
        self.ir.add_temporal_edge(lower, upper)
        for between in range(lower.layer + 1, upper.layer):
            self.held[(lower.column, between)] += 1

    def present(self, g: int) -> List[Coord]:
        """Sites standing for g on the current layer"""
        found = [c for c in self.owned.get(g, []) if c.layer == self.layer]
        if self.placed[g].layer == self.layer:
            found.append(self.placed[g])
        return sorted(found)

    def advance(self) -> None:
        """Open the next layer"""
        self.layer += 1
        self.placed_on_layer = False
        self.spread_on_layer = False


@dataclass
class Route:
    """How one placed neighbor reaches the node being placed"""

    need: int
    source: Coord
    relay: bool = False
    path: List[Coord] = field(default_factory=list)
    direct: bool = False


def refresh(state: MappingState) -> MappingState:
    """Raise every stored node onto the next layers and forget older ports.

    Incomplete nodes are re-placed in id order; a node whose port columns are
    taken waits for the following layer.
    """
    state.advance()
    pending = sorted(state.incomplete)
    while pending:
        deferred = []
        for g in pending:
            port = next(
                (
                    p
                    for p in sorted(state.ports[g], key=_port_order)
                    if p.layer < state.layer
                    and state.is_free(p.at(state.layer))
                    and state.memory_allows(p, state.layer)
                ),
                None,
            )
            if port is None:
                deferred.append(g)
                continue
            relay = port.at(state.layer)
            state.ir.add_ancilla(relay)
            state.connect_up(port, relay)
            state.ports[g] = [relay]
            state.owned.setdefault(g, []).append(relay)
        if len(deferred) == len(pending):
            raise OccupancyDeadlockError(
                state.layer, f"refresh cannot re-place stored nodes {deferred}"
            )
        if deferred:
            state.advance()
        pending = deferred
    state.layers_since_refresh = 0
    state.refreshes += 1
    logger.debug(f"Refresh #{state.refreshes} done, now at layer {state.layer}")
    return state


class Mapper:
    """Stateful place-and-route of one pattern"""

    def __init__(self, pattern: MeasurementPattern, cfg: MapperConfig) -> None:
        self.pattern = pattern
        self.cfg = cfg
        self.strategy = PlacementFactory.create_strategy(cfg.placement)
        self.state = MappingState(FlexLatticeIR(cfg.vh))
        self.dag = dependency_dag(pattern)
        self.neighbors = {
            v: set(pattern.graph.neighbors(v)) for v in sorted(pattern.graph.nodes)
        }
        self._waiting = {v: self.dag.graph.in_degree(v) for v in self.dag.graph.nodes}
        self._front = {v for v, count in self._waiting.items() if count == 0}

    def run(self) -> FlexLatticeIR:
        """Place every node, then check the result against the pattern"""
        st = self.state
        while len(st.placed) < len(self.neighbors):
            front = self._ordered_front()
            if any(self._try_place(v) for v in front):
                continue
            if not st.placed_on_layer and not st.spread_on_layer:
                st.spread_on_layer = True
                if self._spread(front):
                    continue
            self._seal(front)
        problems = check_semantics(self.pattern, st.ir)
        if problems:
            raise MappingError(f"mapped IR is inconsistent: {problems[0]}")
        logger.debug(
            f"Mapped {len(st.placed)} nodes onto {st.ir.layer_count} layers "
            f"({st.refreshes} refreshes, {st.spreads} spreads)"
        )
        return st.ir

    def _ordered_front(self) -> List[int]:
        placed = self.state.placed
        counts = {
            v: sum(1 for u in self.neighbors[v] if u in placed) for v in self._front
        }
        return self.strategy.order_front(sorted(self._front), counts)

    def _needs(self, v: int) -> List[int]:
        return sorted(u for u in self.neighbors[v] if u in self.state.placed)

    def _try_place(self, v: int) -> bool:
        st = self.state
        needs = self._needs(v)
        later = {u for u in self.neighbors[v] if u not in st.placed}
        freed = sum(
            1
            for u in needs
            if st.remaining[u] == {v} and st.placed[u].layer == st.layer
        )
        if st.occupancy(st.layer) - freed + (1 if later else 0) > self.cfg.cap_count:
            return False
        free = [site for site in st.sites() if st.is_free(site)]
        anchors = [self._anchor_columns(u) for u in needs]
        for site in self.strategy.rank_sites(free, anchors):
            routes = self._plan(v, site, needs)
            if routes is not None:
                self._commit(v, site, routes, later)
                return True
        return False

    def _anchor_columns(self, u: int) -> List[Column]:
        st = self.state
        return sorted({c.column for c in st.present(u) + st.ports[u]})

    def _plan(self, v: int, site: Coord, needs: List[int]) -> Optional[List[Route]]:
        if len(needs) <= MAX_PERMUTED_NEEDS:
            orders: Sequence[Sequence[int]] = list(itertools.permutations(needs))
        else:
            orders = [needs, needs[::-1]]
        for order in orders:
            reserved = {site}
            routes: List[Route] = []
            temporal_in = False
            for u in order:
                route = None if temporal_in else self._direct(u, v, site)
                if route is not None:
                    temporal_in = True
                else:
                    route = self._route(u, site, reserved)
                if route is None:
                    break
                reserved.update(route.path)
                routes.append(route)
            else:
                return routes
        return None

    def _direct(self, u: int, v: int, site: Coord) -> Optional[Route]:
        st = self.state
        if st.remaining[u] != {v} and len(st.ports[u]) < 2:
            return None
        for port in sorted(st.ports[u], key=_port_order):
            if (
                port.column == site.column
                and port.layer < site.layer
                and st.memory_allows(port, site.layer)
            ):
                return Route(u, port, direct=True)
        return None

    def _route(self, u: int, site: Coord, reserved: Set[Coord]) -> Optional[Route]:
        """Shortest wire from u's sites or relay columns to a neighbor of site"""
        st = self.state
        layer = site.layer
        parent: Dict[Coord, Optional[Coord]] = {}
        roots: Dict[Coord, Tuple[Coord, bool]] = {}
        heap: List[Tuple[int, int, Coord]] = []
        order = itertools.count()
        for start in st.present(u):
            parent[start] = None
            roots[start] = (start, False)
            heapq.heappush(heap, (0, next(order), start))
        for port in sorted(st.ports[u], key=_port_order):
            relay = port.at(layer)
            if port.layer >= layer or relay in parent:
                continue
            if st.is_free(relay, reserved) and st.memory_allows(port, layer):
                parent[relay] = None
                roots[relay] = (port, True)
                heapq.heappush(heap, (1, next(order), relay))

        while heap:
            dist, _, current = heapq.heappop(heap)
            if abs(current.x - site.x) + abs(current.y - site.y) == 1:
                chain = [current]
                while parent[chain[-1]] is not None:
                    chain.append(parent[chain[-1]])  # type: ignore[arg-type]
                chain.reverse()
                source, relay = roots[chain[0]]
                return Route(u, source, relay, chain if relay else chain[1:])
            if dist >= self.cfg.budget:
                continue
            for dx, dy in DIRECTIONS:
                step = Coord(current.x + dx, current.y + dy, layer)
                if step not in parent and st.is_free(step, reserved):
                    parent[step] = current
                    heapq.heappush(heap, (dist + 1, next(order), step))
        return None

    def _commit(
        self, v: int, site: Coord, routes: List[Route], later: Set[int]
    ) -> None:
        st = self.state
        ir = st.ir
        ir.map_node(site, v)
        for route in routes:
            u = route.need
            if route.direct:
                st.connect_up(route.source, site)
                st.ports[u].remove(route.source)
            else:
                previous = route.source
                chain = route.path
                if route.relay:
                    ir.add_ancilla(chain[0])
                    st.connect_up(route.source, chain[0])
                    st.ports[u].remove(route.source)
                    previous, chain = chain[0], chain[1:]
                for step in chain:
                    ir.add_ancilla(step)
                    ir.add_spatial_edge(previous, step)
                    previous = step
                ir.add_spatial_edge(previous, site)
                if route.relay or route.source != st.placed[u]:
                    st.owned.setdefault(u, []).extend(route.path)
                    st.ports[u].extend(route.path)
            st.remaining[u].discard(v)
            if not st.remaining[u]:
                st.ports[u] = []
        st.placed[v] = site
        st.remaining[v] = set(later)
        st.ports[v] = [site] if later else []
        st.owned.setdefault(v, [])
        st.placed_on_layer = True
        st.stalled = 0
        st.occupancy_log.append((st.layer, st.occupancy(st.layer)))

        self._front.discard(v)
        for successor in self.dag.graph.successors(v):
            self._waiting[successor] -= 1
            if self._waiting[successor] == 0:
                self._front.add(successor)

    def _spread(self, front: List[int]) -> bool:
        """Move one port of a blocked node's neighbor onto a fresh column"""
        st = self.state
        for strict in (True, False):
            for v in front:
                needs = self._needs(v)
                if len(needs) < 2:
                    continue
                columns = {
                    u: {p.column for p in st.ports[u] if p.layer < st.layer}
                    for u in needs
                }
                for u in sorted(needs, key=lambda n: (len(columns[n]), n)):
                    taken = set(columns[u])
                    if strict:
                        for other in needs:
                            taken |= columns[other]
                    if self._spread_ports(u, taken):
                        return True
        return False

    def _spread_ports(self, u: int, taken: Set[Column]) -> bool:
        st = self.state
        for port in sorted(st.ports[u], key=_port_order):
            relay = port.at(st.layer)
            if port.layer >= st.layer or not st.is_free(relay):
                continue
            if not st.memory_allows(port, st.layer):
                continue
            for dx, dy in DIRECTIONS:
                side = Coord(relay.x + dx, relay.y + dy, st.layer)
                if not st.is_free(side) or side.column in taken:
                    continue
                st.ir.add_ancilla(relay)
                st.connect_up(port, relay)
                st.ir.add_ancilla(side)
                st.ir.add_spatial_edge(relay, side)
                st.ports[u].remove(port)
                st.ports[u].extend([relay, side])
                st.owned.setdefault(u, []).extend([relay, side])
                st.spreads += 1
                logger.debug(f"Spread g{u} to {side} on layer {st.layer}")
                return True
        return False

    def _seal(self, front: List[int]) -> None:
        st = self.state
        if not st.placed_on_layer:
            st.stalled += 1
            if st.stalled > self.cfg.max_stalled_layers:
                self._give_up(front)
        st.layers_since_refresh += 1
        interval = self.cfg.refresh_interval_layers
        if interval is not None and st.layers_since_refresh >= interval and st.placed:
            refresh(st)
        else:
            st.advance()

    def _give_up(self, front: List[int]) -> None:
        vh = self.cfg.vh
        reach = min(4, vh.width * vh.height - 1) + 1
        for v in front:
            needs = self._needs(v)
            if len(needs) > reach:
                raise UnroutableEdgeError(
                    (needs[reach], v),
                    f"{len(needs)} neighbors cannot meet on a "
                    f"{vh.width}x{vh.height} layer",
                )
        raise OccupancyDeadlockError(
            self.state.layer,
            f"no placement for {self.state.stalled} layers, front {front[:5]}",
        )


def map_program(pattern: MeasurementPattern, cfg: MapperConfig) -> FlexLatticeIR:
    """FlexLattice IR realizing every node and edge of pattern."""
    return Mapper(pattern, cfg).run()


def check_semantics(pattern: MeasurementPattern, ir: FlexLatticeIR) -> List[Violation]:
    """IR violations plus any difference between the contracted graph and pattern"""
    found = validate_ir(ir, expected_g_nodes=pattern.graph.nodes)
    contraction = contract_ancillas(ir)
    found.extend(contraction.violations)
    expected = {tuple(sorted(e)) for e in pattern.edges()}
    realized = {tuple(sorted(e)) for e in contraction.graph.edges}
    for u, v in sorted(expected - realized):
        found.append(Violation("missing-edge", f"g{u}-g{v} is not realized"))
    for u, v in sorted(realized - expected):
        found.append(Violation("extra-edge", f"g{u}-g{v} is not a program edge"))
    return found


@dataclass(frozen=True)
class IRMetrics:
    """Size counters of an IR"""

    logical_layers: int
    mapped_nodes: int
    ancilla_nodes: int
    spatial_edges: int
    temporal_edges: int
    stored_node_layer_spans: Tuple[int, ...]

    def as_dict(self) -> Dict[str, object]:
        """Plain dict for reports"""
        return asdict(self)


def ir_metrics(ir: FlexLatticeIR) -> IRMetrics:
    """Exact counts; spans list every temporal edge that goes through memory"""
    mapped = len(ir.g_nodes())
    return IRMetrics(
        logical_layers=ir.layer_count,
        mapped_nodes=mapped,
        ancilla_nodes=len(ir.nodes) - mapped,
        spatial_edges=len(ir.spatial_edges),
        temporal_edges=len(ir.temporal_edges),
        stored_node_layer_spans=tuple(
            sorted(high - low for _, low, high in ir.temporal_edges if high - low >= 2)
        ),
    )
