# -*- coding: utf-8 -*-
"""Online pass: consume resource-state layers (RSLs) until a program is realized.

Each RSL is sampled, renormalized to the virtual hardware size and checked
against the time-like connections the program demands on the next program
layer. An RSL that passes both becomes the logical layer of that program
layer; any other RSL is a routing layer whose qubits are all fused into the
next RSL. Bundles serving cross-layer edges wait in delay lines, tracked by a
ledger that aborts the run once a bundle outlives the photon lifetime.
"""

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Literal, Optional, Set, Tuple

import networkx as nx
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import (
    ConfigError,
    DelayBudgetExceeded,
    ExecutionAborted,
    RslCapExceeded,
)
from src.frontend import MeasurementPattern
from src.fusion_layer import HardwareConfig, MergedLayer, build_merged_layer
from src.graphstate import (
    ByproductWord,
    MeasurementBasis,
    propagate_through_measurement,
)
from src.ir import (
    Coord,
    FlexLatticeIR,
    InstructionProgram,
    NodeKind,
    TemporalEdge,
    VirtualHardwareConfig,
    replay_program,
    site_graph,
)
from src.renormalization import (
    RenormConfig,
    RenormalizedLattice,
    SiteGrid,
    component_roots,
    renormalize_2d,
    shortest_path,
)

REPORT_SCHEMA_VERSION = 1

# (p_fusion, virtual hardware side) -> RSL side
SIZING_PRESETS: Dict[Tuple[float, int], int] = {
    (0.9, 2): 24,
    (0.9, 3): 36,
    (0.9, 5): 60,
    (0.75, 2): 48,
    (0.75, 5): 120,
    (0.75, 8): 192,
    (0.75, 10): 240,
}


def hardware_preset(
    p_fusion: float, virtual_size: int, **overrides: Any
) -> Tuple[HardwareConfig, RenormConfig]:
    """Hardware and renormalization settings for a square virtual hardware

    Raises:
        ConfigError: If no preset covers the pair
    """
    try:
        side = SIZING_PRESETS[(p_fusion, virtual_size)]
    except KeyError as e:
        logger.error(f"No sizing preset for p={p_fusion}, side {virtual_size}")
        raise ConfigError(
            f"no sizing preset for p={p_fusion} and virtual size {virtual_size}, "
            f"choose from {sorted(SIZING_PRESETS)}"
        ) from e
    hardware = HardwareConfig(
        rsl_width=side, rsl_height=side, p_fusion=p_fusion, **overrides
    )
    return hardware, RenormConfig(node_size=side // virtual_size)


def layer_rng(seed: int, trial: int, rsl: int) -> np.random.Generator:
    """Independent stream per (trial, RSL)"""
    sequence = np.random.SeedSequence(seed, spawn_key=(trial, rsl))
    return np.random.Generator(np.random.PCG64(sequence))


class RslRecord(BaseModel):
    """What one consumed RSL turned into"""

    model_config = ConfigDict(frozen=True)

    rsl: int
    label: str
    kind: Literal["logical", "routing"]
    merge_fusions: int
    bond_fusions: int
    temporal_fusions: int
    lattice: Optional[Tuple[int, int]] = None

    @property
    def fusions(self) -> int:
        return self.merge_fusions + self.bond_fusions + self.temporal_fusions


class ExecutionReport(BaseModel):
    """Outcome of one online run; contains no wall-clock data"""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = REPORT_SCHEMA_VERSION
    success: bool
    abort_reason: Optional[str] = None
    rsl_consumed: int = 0
    fusions_attempted: int = 0
    merge_factor: int = 1
    cycles: int = 0
    logical_layer_indices: List[int] = Field(default_factory=list)
    routing_layer_count: int = 0
    layer_labels: List[str] = Field(default_factory=list)
    delay_peak_cycles: int = 0
    ledger_durations: List[int] = Field(default_factory=list)
    renorm_stats: List[RslRecord] = Field(default_factory=list)
    measurement_plan: Dict[str, str] = Field(default_factory=dict)
    z_measured_sites: int = 0
    repair_words: Dict[str, str] = Field(default_factory=dict)

    @property
    def rsl_per_logical(self) -> float:
        """RSLs consumed per realized program layer"""
        if not self.logical_layer_indices:
            return float("nan")
        return self.rsl_consumed / len(self.logical_layer_indices)

    def to_json(self) -> str:
        """Sorted-key JSON, byte-stable for identical runs"""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


@dataclass
class DelayLedger:
    """Bundles parked in delay lines, keyed by the temporal edge they serve"""

    lifetime: int
    stored: Dict[TemporalEdge, int] = field(default_factory=dict)
    durations: Dict[TemporalEdge, int] = field(default_factory=dict)

    def store(self, edge: TemporalEdge, cycle: int) -> None:
        self.stored[edge] = cycle

    def close(self, edge: TemporalEdge, cycle: int) -> int:
        """Duration of the closed entry

        Raises:
            DelayBudgetExceeded: If the bundle outlived the photon lifetime
        """
        duration = cycle - self.stored.pop(edge)
        self.durations[edge] = duration
        if duration > self.lifetime:
            raise DelayBudgetExceeded(
                f"bundle for {edge} stored {duration} cycles > {self.lifetime}"
            )
        return duration

    def check(self, cycle: int) -> None:
        """Abort if any open entry is already older than the lifetime"""
        for edge, stored_at in sorted(self.stored.items()):
            if cycle - stored_at > self.lifetime:
                raise DelayBudgetExceeded(
                    f"bundle for {edge} waiting {cycle - stored_at} cycles "
                    f"> {self.lifetime}"
                )

    @property
    def peak(self) -> int:
        return max(self.durations.values(), default=0)


@dataclass
class Bundle:
    """Physical qubits carrying one time-like connection"""

    edge: TemporalEdge
    target: Tuple[int, int]
    mask: np.ndarray
    entries: Optional[np.ndarray] = None


def bundle_mask(rep: Tuple[int, int], shape: Tuple[int, int], size: int) -> np.ndarray:
    """The representative site and its neighbors (up, right, down, left)"""
    height, width = shape
    x, y = rep
    mask = np.zeros(shape, dtype=bool)
    candidates = [(x, y), (x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)]
    inside = [(cx, cy) for cx, cy in candidates if 0 <= cx < width and 0 <= cy < height]
    for cx, cy in inside[:size]:
        mask[cy, cx] = True
    return mask


def basis_label(basis: MeasurementBasis) -> str:
    """+X, -Z, ... for Pauli bases, plane and angle otherwise"""
    pauli = basis.as_pauli()
    if pauli is not None:
        sign, axis = pauli
        return f"{'+' if sign > 0 else '-'}{axis.value}"
    plane = basis.plane[0].value + basis.plane[1].value
    return f"{plane}({basis.angle:.6f})"


def measurement_plan(
    ir: FlexLatticeIR,
    pattern: Optional[MeasurementPattern] = None,
    byproducts: Optional[Dict[int, ByproductWord]] = None,
) -> Tuple[Dict[str, str], int]:
    """Basis per declared site and the number of Z-measured leftover sites.

    Mapped nodes take the pattern basis pushed through their byproduct word.
    An ancilla component of even size is measured all in X; an odd one
    measures its first site in Y and the rest in X.
    """
    words = byproducts or {}
    plan: Dict[str, str] = {}
    for coord, node in sorted(ir.nodes.items()):
        if node.kind is not NodeKind.MAPPED or node.g_node is None:
            continue
        g = node.g_node
        basis = pattern.node_basis.get(g) if pattern is not None else None
        if basis is None:
            plan[str(coord)] = "output" if pattern is not None else f"g{g}"
            continue
        adjusted, _ = propagate_through_measurement(words.get(g, ()), basis)
        plan[str(coord)] = basis_label(adjusted)

    sites = site_graph(ir)
    ancillas = [c for c, n in ir.nodes.items() if n.kind is NodeKind.ANCILLA]
    for component in sorted(nx.connected_components(sites.subgraph(ancillas)), key=min):
        ordered = sorted(component)
        odd = len(ordered) % 2 == 1
        for i, coord in enumerate(ordered):
            plan[str(coord)] = "+Y" if odd and i == 0 else "+X"

    config = ir.config
    unused = ir.layer_count * config.width * config.height - len(ir.nodes)
    return plan, unused


def infer_virtual_hardware(program: InstructionProgram) -> VirtualHardwareConfig:
    """Smallest virtual hardware holding every coordinate of the program"""
    coords = [i.v for i in program]
    for instruction in program:
        if isinstance(instruction.operand, Coord):
            coords.append(instruction.operand)
    if not coords:
        return VirtualHardwareConfig()
    return VirtualHardwareConfig(
        width=max(c.x for c in coords) + 1, height=max(c.y for c in coords) + 1
    )


class OnlineEngine:
    """One independent online run; safe to use several per process"""

    def __init__(
        self,
        cfg: HardwareConfig,
        rc: RenormConfig,
        pattern: Optional[MeasurementPattern] = None,
        byproducts: Optional[Dict[int, ByproductWord]] = None,
        workers: int = 1,
        trial: int = 0,
    ) -> None:
        self.cfg = cfg
        self.rc = rc
        self.pattern = pattern
        self.byproducts = byproducts
        self.workers = workers
        self.trial = trial
        self.events: List[Dict[str, Any]] = []
        self.timings: List[float] = []
        self._reset()

    def _reset(self) -> None:
        self.events = []
        self.timings = []
        self.ledger = DelayLedger(self.cfg.photon_lifetime_cycles)
        self.rsl = 0
        self.realized = 0
        self.fusions = 0
        self.logical_rsl: List[int] = []
        self.routing_total = 0
        self.routing_since = 0
        self.previous_routing = False
        self.active: List[Bundle] = []
        self.parked: Dict[TemporalEdge, Bundle] = {}
        self.records: List[RslRecord] = []
        self.outgoing: Dict[int, List[TemporalEdge]] = {}
        self.layer_nodes: Dict[int, List[Tuple[Tuple[int, int], int]]] = {}
        self.repairs: Dict[int, ByproductWord] = {}

    def execute(
        self,
        program: InstructionProgram,
        vh: Optional[VirtualHardwareConfig] = None,
    ) -> ExecutionReport:
        """Realize every layer of program

        Raises:
            ConfigError: If the virtual hardware exceeds the renormalized size
            DelayBudgetExceeded: If a stored bundle outlives the photon lifetime
            RslCapExceeded: If the RSL cap is reached first
        """
        return self.run(replay_program(program, vh or infer_virtual_hardware(program)))

    def run(self, ir: FlexLatticeIR) -> ExecutionReport:
        self._reset()
        vh = ir.config
        target = (vh.width, vh.height)
        if ir.layer_count:
            capacity = self.rc.target(self.cfg.rsl_width, self.cfg.rsl_height)
            if target[0] > capacity[0] or target[1] > capacity[1]:
                raise ConfigError(
                    f"virtual hardware {target} exceeds the renormalized size "
                    f"{capacity} of a {self.cfg.rsl_width}x{self.cfg.rsl_height} RSL"
                )
        for edge in sorted(ir.temporal_edges):
            self.outgoing.setdefault(edge[1], []).append(edge)
        for coord, node in sorted(ir.nodes.items()):
            if node.kind is NodeKind.MAPPED and node.g_node is not None:
                entry = (coord.column, node.g_node)
                self.layer_nodes.setdefault(coord.layer, []).append(entry)
        try:
            while self.realized < ir.layer_count:
                self._step(ir, target)
        except ExecutionAborted as e:
            logger.warning(f"Online pass aborted after {self.rsl} RSLs: {e}")
            e.report = self._report(ir, e.reason)
            raise
        return self._report(ir, None)

    def _step(self, ir: FlexLatticeIR, target: Tuple[int, int]) -> None:
        cfg = self.cfg
        t = self.rsl
        if t >= cfg.rsl_cap:
            raise RslCapExceeded(
                f"RSL cap {cfg.rsl_cap} reached with "
                f"{self.realized}/{ir.layer_count} layers realized"
            )
        started = time.perf_counter()
        rng = layer_rng(cfg.seed, self.trial, t)
        layer, _ = build_merged_layer(cfg, rng)
        temporal = self._arrive(layer, rng)
        cycle = t * cfg.merge_factor
        self.ledger.check(cycle)

        lattice = renormalize_2d(layer, self.rc, target, self.workers)
        self.rsl += 1
        logical = self.connect_time_like(lattice, layer, cycle)
        if logical:
            label = str(self.realized)
        else:
            self.routing_since += 1
            self.routing_total += 1
            label = f"{self.realized}.{self.routing_since}"
        self.previous_routing = not logical

        record = RslRecord(
            rsl=t,
            label=label,
            kind="logical" if logical else "routing",
            merge_fusions=layer.merge_fusions,
            bond_fusions=layer.bond_fusions,
            temporal_fusions=temporal,
            lattice=(lattice.width, lattice.height) if lattice is not None else None,
        )
        self.records.append(record)
        self.fusions += record.fusions
        self._event("rsl", **record.model_dump(mode="json"), bonds=layer.bond_count)
        self.timings.append(time.perf_counter() - started)

    def connect_time_like(
        self, lattice: Optional[RenormalizedLattice], layer: MergedLayer, cycle: int
    ) -> bool:
        """Close the pending demands on layer, or turn it into a routing layer.

        The layer is logical when it renormalized and every active bundle
        reaches its logical node through fused sites. Otherwise the bundles
        forward into the next RSL.

        Raises:
            DelayBudgetExceeded: If a closed entry outlived the photon lifetime
        """
        grid = SiteGrid(layer) if self.active else None
        roots = component_roots(grid) if grid is not None else []
        routes = None
        if lattice is not None:
            routes = self._connected(grid, roots, lattice)
        if lattice is None or routes is None:
            self._forward(roots, layer)
            return False
        for edge, path in routes:
            self._event("connect", edge=list(edge), cycle=cycle, path=path)
        self._commit(lattice, layer, cycle)
        return True

    def _arrive(self, layer: MergedLayer, rng: np.random.Generator) -> int:
        """Temporal fusions into this RSL; sets each bundle's entry sites.

        After a routing layer every site fuses upward, but only while bundles
        are waiting; a routing layer with nothing to carry forwards nothing.
        """
        shape = (layer.height, layer.width)
        upward = rng.random(shape) < self.cfg.p_eff
        for bundle in self.active:
            bundle.entries = bundle.mask & upward
        if not self.active:
            return 0
        if self.previous_routing:
            return layer.width * layer.height
        return int(sum(int(bundle.mask.sum()) for bundle in self.active))

    def _connected(
        self,
        grid: Optional[SiteGrid],
        roots: List[Any],
        lattice: RenormalizedLattice,
    ) -> Optional[List[Tuple[TemporalEdge, List[List[int]]]]]:
        """Site path of every active bundle to its logical node, or None.

        A disjoint-set check rejects bundles outside the goal's component, then
        BFS finds a path that avoids the edge routes of coarse edges not
        incident to the goal and the sites earlier bundles already claimed.
        """
        if grid is None:
            return []
        edge_sites = {
            (a, b): {grid.index(site) for site in lattice.edge_path(a, b)}
            for a, b in lattice.edges()
        }
        everywhere = set(range(len(grid.adj)))
        reserved: Set[int] = set()
        routes = []
        for bundle in self.active:
            goal = grid.index(lattice.rep[bundle.target])
            region = {grid.index(site) for site in lattice.regions[bundle.target]}
            assert bundle.entries is not None
            entries = np.flatnonzero(bundle.entries).tolist()
            if not any(roots[i] == roots[goal] for i in entries):
                return None
            foreign: Set[int] = set()
            for (a, b), sites in edge_sites.items():
                if bundle.target not in (a, b):
                    foreign |= sites
            allowed = everywhere - (foreign - region) - reserved
            path = shortest_path(grid, allowed, entries, {goal})
            if path is None:
                return None
            reserved.update(index for index in path if index not in region)
            sites = [list(grid.site(index)) for index in path]
            routes.append((bundle.edge, sites))
        return routes

    def _forward(self, roots: List[Any], layer: MergedLayer) -> None:
        """Routing layer: bundles spread over the components they entered"""
        if not self.active:
            return
        labels = np.asarray(roots).reshape(layer.height, layer.width)
        for bundle in self.active:
            assert bundle.entries is not None
            if bundle.entries.any():
                bundle.mask = np.isin(labels, np.unique(labels[bundle.entries]))
            # no entry fused: the bundle keeps its previous footprint

    def _commit(
        self, lattice: RenormalizedLattice, layer: MergedLayer, cycle: int
    ) -> None:
        for bundle in self.active:
            if bundle.edge in self.ledger.stored:
                duration = self.ledger.close(bundle.edge, cycle)
                self._event(
                    "close", edge=list(bundle.edge), cycle=cycle, duration=duration
                )
        program_layer = self.realized
        self.logical_rsl.append(self.rsl - 1)
        for column, g in self.layer_nodes.get(program_layer, []):
            word = layer.byproduct(lattice.rep[column])
            if word:
                self.repairs[g] = word + self.repairs.get(g, ())
        shape = (layer.height, layer.width)
        arriving: List[Bundle] = []
        for edge in self.outgoing.get(program_layer, []):
            column, low, high = edge
            mask = bundle_mask(lattice.rep[column], shape, self.cfg.bundle_size)
            bundle = Bundle(edge, column, mask)
            if high == low + 1:
                arriving.append(bundle)
            else:
                self.parked[edge] = bundle
                self.ledger.store(edge, cycle)
                self._event("store", edge=list(edge), cycle=cycle)
        for edge in sorted(self.parked):
            if edge[2] == program_layer + 1:
                arriving.append(self.parked.pop(edge))
                self._event("retrieve", edge=list(edge), cycle=cycle)
        self.active = arriving
        self.realized += 1
        self.routing_since = 0
        logger.debug(f"Program layer {program_layer} realized on RSL {self.rsl - 1}")

    def _event(self, name: str, **payload: Any) -> None:
        self.events.append({"event": name, **payload})

    def _report(self, ir: FlexLatticeIR, reason: Optional[str]) -> ExecutionReport:
        words = dict(self.byproducts or {})
        for g, word in self.repairs.items():
            words[g] = word + words.get(g, ())
        plan, unused = measurement_plan(ir, self.pattern, words)
        return ExecutionReport(
            success=reason is None,
            abort_reason=reason,
            rsl_consumed=self.rsl,
            fusions_attempted=self.fusions,
            merge_factor=self.cfg.merge_factor,
            cycles=self.rsl * self.cfg.merge_factor,
            logical_layer_indices=list(self.logical_rsl),
            routing_layer_count=self.routing_total,
            layer_labels=[record.label for record in self.records],
            delay_peak_cycles=self.ledger.peak,
            ledger_durations=[d for _, d in sorted(self.ledger.durations.items())],
            renorm_stats=list(self.records),
            measurement_plan=plan,
            z_measured_sites=unused,
            repair_words={
                str(g): " ".join(generator.value for generator in word)
                for g, word in sorted(self.repairs.items())
            },
        )


def execute(
    program: InstructionProgram,
    cfg: HardwareConfig,
    rc: RenormConfig,
    vh: Optional[VirtualHardwareConfig] = None,
    pattern: Optional[MeasurementPattern] = None,
    trial: int = 0,
) -> ExecutionReport:
    """Run the online pass once with a fresh engine"""
    return OnlineEngine(cfg, rc, pattern=pattern, trial=trial).execute(program, vh)


def events_to_jsonl(events: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(event, sort_keys=True) + "\n" for event in events)


def recount_fusions(lines: Iterable[str]) -> int:
    """Attempted fusions recounted from a JSON-lines event log"""
    total = 0
    for line in lines:
        if not line.strip():
            continue
        event = json.loads(line)
        if event["event"] == "rsl":
            total += event["merge_fusions"] + event["bond_fusions"]
            total += event["temporal_fusions"]
    return total


class DepthModel(BaseModel):
    """Per-layer fusion counts of an all-fusions-must-succeed execution"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    layer_fusions: List[int]
    link_fusions: List[int]

    @model_validator(mode="after")
    def _aligned(self) -> "DepthModel":
        if len(self.layer_fusions) != len(self.link_fusions):
            raise ValueError("layer_fusions and link_fusions differ in length")
        if min(self.layer_fusions + self.link_fusions, default=0) < 0:
            raise ValueError("fusion counts must be non-negative")
        return self

    @property
    def depth(self) -> int:
        return len(self.layer_fusions)

    @classmethod
    def from_ir(cls, ir: FlexLatticeIR, merge_factor: int = 1) -> "DepthModel":
        """Lattice stand-in for a fixed fusion pattern.

        A declared site costs its merges plus one fusion, a spatial edge one
        fusion; temporal edges landing on a layer are its links.
        """
        nodes = Counter(coord.layer for coord in ir.nodes)
        spatial = Counter(layer for _, _, layer in ir.spatial_edges)
        links = Counter(high for _, _, high in ir.temporal_edges)
        layers = range(ir.layer_count)
        return cls(
            layer_fusions=[nodes[i] * merge_factor + spatial[i] for i in layers],
            link_fusions=[links[i] for i in layers],
        )


def baseline_retry_execute(
    model: DepthModel, cfg: HardwareConfig, trial: int = 0
) -> ExecutionReport:
    """Repeat each RSL until all its fusions succeed; restart on a failed link.

    Hitting the RSL cap is a reported outcome, not an error.
    """
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(trial,)))
    )
    p = cfg.p_eff
    cap = cfg.rsl_cap
    rsl = fusions = layer = restarts = 0
    reason: Optional[str] = None
    while layer < model.depth:
        intra = model.layer_fusions[layer]
        success = p**intra
        attempts = int(rng.geometric(success)) if success > 0 else cap + 1
        if rsl + attempts > cap:
            fusions += (cap - rsl) * intra
            rsl = cap
            reason = RslCapExceeded.reason
            break
        rsl += attempts
        fusions += attempts * intra
        link = model.link_fusions[layer]
        if layer > 0 and link:
            fusions += link
            if rng.random() >= p**link:
                restarts += 1
                layer = 0
                continue
        layer += 1
    logger.debug(f"Baseline consumed {rsl} RSLs with {restarts} restarts")
    return ExecutionReport(
        success=reason is None,
        abort_reason=reason,
        rsl_consumed=rsl,
        fusions_attempted=fusions,
        merge_factor=cfg.merge_factor,
        cycles=rsl * cfg.merge_factor,
    )
