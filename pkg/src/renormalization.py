# -*- coding: utf-8 -*-
"""2D renormalization: carve a coarse square lattice out of a merged layer.

The layer is split into modules separated by interval corridors. Inside a
module, vertical paths are searched in column bands of node_size sites and
horizontal paths in row bands, alternately. Each search first checks that the
two borders of its band are connected with a disjoint set, then takes a BFS
shortest path; the sites around a found path are removed for later searches
of the same orientation. Module paths are then stitched across the corridors,
and a coarse line exists only if every one of its pieces does.
"""

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field

from src.errors import ConfigError
from src.fusion_layer import MergedLayer

Site = Tuple[int, int]
CoarseNode = Tuple[int, int]


class DisjointSet:
    """Union by rank with path compression over hashable elements"""

    def __init__(self) -> None:
        self.parent: Dict[Hashable, Hashable] = {}
        self.rank: Dict[Hashable, int] = {}

    def add(self, element: Hashable) -> None:
        """Register element as its own singleton set"""
        if element not in self.parent:
            self.parent[element] = element
            self.rank[element] = 0

    def find(self, element: Hashable) -> Hashable:
        """Root of the set holding element, compressing the walk"""
        self.add(element)
        root = element
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[element] != root:
            self.parent[element], element = root, self.parent[element]
        return root

    def union(self, a: Hashable, b: Hashable) -> None:
        """Merge the sets of a and b, lower rank under higher"""
        root_a, root_b = self.find(a), self.find(b)
        if root_a == root_b:
            return
        if self.rank[root_a] < self.rank[root_b]:
            root_a, root_b = root_b, root_a
        self.parent[root_b] = root_a
        if self.rank[root_a] == self.rank[root_b]:
            self.rank[root_a] += 1

    def connected(self, a: Hashable, b: Hashable) -> bool:
        """Whether a and b share a set"""
        return self.find(a) == self.find(b)


class RenormConfig(BaseModel):
    """Target node size and modular layout"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    node_size: int = Field(4, ge=2)
    module_count: int = Field(1, ge=1)
    mi_ratio: float = Field(7.0, gt=0.0)

    def module_grid(self) -> Tuple[int, int]:
        """(columns, rows) of modules, as square as the count allows"""
        m = self.module_count
        columns = next(c for c in range(1, m + 1) if m % c == 0 and c * c >= m)
        return columns, m // columns

    def layout(self, width: int, height: int) -> "ModuleLayout":
        """Module spans for a width x height layer.

        Raises:
            ConfigError: If a module cannot hold one node
        """
        columns, rows = self.module_grid()
        x_spans = _axis_spans(width, columns, self.mi_ratio)
        y_spans = _axis_spans(height, rows, self.mi_ratio)
        for start, stop in x_spans + y_spans:
            if stop - start < self.node_size:
                raise ConfigError(
                    f"{self.module_count} modules at MI ratio {self.mi_ratio} leave "
                    f"{stop - start} sites per module, below node size {self.node_size}"
                )
        return ModuleLayout(width, height, self.node_size, x_spans, y_spans)

    def target(self, width: int, height: int) -> Tuple[int, int]:
        """Coarse size reached when every band yields a line"""
        return self.layout(width, height).capacity


def _axis_spans(size: int, count: int, mi_ratio: float) -> List[Tuple[int, int]]:
    if count == 1:
        return [(0, size)]
    interval = max(1, math.floor(size / (count * mi_ratio + count - 1)))
    module = (size - (count - 1) * interval) // count
    pitch = module + interval
    return [(i * pitch, i * pitch + module) for i in range(count)]


@dataclass(frozen=True)
class Module:
    """One rectangular module; column/row index it in the module grid"""

    column: int
    row: int
    x0: int
    x1: int
    y0: int
    y1: int


@dataclass(frozen=True)
class ModuleLayout:
    """Module spans of one layer; intervals between spans carry no nodes"""

    width: int
    height: int
    node_size: int
    x_spans: List[Tuple[int, int]]
    y_spans: List[Tuple[int, int]]

    @property
    def modules(self) -> List[Module]:
        """Modules in row-major order"""
        return [
            Module(a, b, x0, x1, y0, y1)
            for b, (y0, y1) in enumerate(self.y_spans)
            for a, (x0, x1) in enumerate(self.x_spans)
        ]

    def bands(self, start: int, stop: int) -> int:
        """Whole node bands fitting in a span"""
        return (stop - start) // self.node_size

    @property
    def capacity(self) -> Tuple[int, int]:
        """Coarse (width, height) if every module carves fully"""
        return (
            sum(self.bands(*span) for span in self.x_spans),
            sum(self.bands(*span) for span in self.y_spans),
        )


@dataclass
class ModulePaths:
    """Vertical paths per column band, horizontal per row band; None if failed"""

    module: Module
    vertical: List[Optional[List[Site]]] = field(default_factory=list)
    horizontal: List[Optional[List[Site]]] = field(default_factory=list)


@dataclass
class RenormalizedLattice:
    """Coarse grid of logical nodes carved from one layer.

    Node (k, j) sits where vertical line k meets horizontal line j; its region
    is every site the two lines share and its representative is the first of
    them along the vertical line.
    """

    width: int
    height: int
    vertical_paths: List[List[Site]]
    horizontal_paths: List[List[Site]]
    rep: Dict[CoarseNode, Site] = field(default_factory=dict)
    regions: Dict[CoarseNode, Tuple[Site, ...]] = field(default_factory=dict)

    @classmethod
    def from_lines(
        cls, vertical: List[List[Site]], horizontal: List[List[Site]]
    ) -> "RenormalizedLattice":
        lattice = cls(len(vertical), len(horizontal), vertical, horizontal)
        for j, h_path in enumerate(horizontal):
            crossing = set(h_path)
            for k, v_path in enumerate(vertical):
                shared = [site for site in v_path if site in crossing]
                lattice.rep[(k, j)] = shared[0]
                lattice.regions[(k, j)] = tuple(sorted(set(shared)))
        return lattice

    @property
    def size(self) -> int:
        return self.width * self.height

    def truncated(self, width: int, height: int) -> "RenormalizedLattice":
        """The first width vertical and height horizontal lines"""
        return RenormalizedLattice.from_lines(
            self.vertical_paths[:width], self.horizontal_paths[:height]
        )

    def edge_path(self, a: CoarseNode, b: CoarseNode) -> List[Site]:
        """Site path realizing the coarse edge a-b"""
        (k1, j1), (k2, j2) = sorted((a, b))
        if k1 == k2 and j2 == j1 + 1:
            line = self.vertical_paths[k1]
        elif j1 == j2 and k2 == k1 + 1:
            line = self.horizontal_paths[j1]
        else:
            raise ValueError(f"{a} and {b} are not coarse neighbors")
        i1, i2 = sorted((line.index(self.rep[a]), line.index(self.rep[b])))
        return line[i1 : i2 + 1]

    def edges(self) -> List[Tuple[CoarseNode, CoarseNode]]:
        out = []
        for j in range(self.height):
            for k in range(self.width):
                if k + 1 < self.width:
                    out.append(((k, j), (k + 1, j)))
                if j + 1 < self.height:
                    out.append(((k, j), (k, j + 1)))
        return out


class SiteGrid:
    """Flat adjacency of a merged layer, sites indexed y * width + x"""

    def __init__(self, layer: MergedLayer) -> None:
        self.width = w = layer.width
        self.height = h = layer.height
        h_bonds = layer.h_bonds.tolist()
        v_bonds = layer.v_bonds.tolist()
        self.adj: List[List[int]] = [[] for _ in range(w * h)]
        for y in range(h):
            for x in range(w):
                site = y * w + x
                # up, right, down, left
                if y > 0 and v_bonds[y - 1][x]:
                    self.adj[site].append(site - w)
                if x < w - 1 and h_bonds[y][x]:
                    self.adj[site].append(site + 1)
                if y < h - 1 and v_bonds[y][x]:
                    self.adj[site].append(site + w)
                if x > 0 and h_bonds[y][x - 1]:
                    self.adj[site].append(site - 1)

    def site(self, index: int) -> Site:
        return (index % self.width, index // self.width)

    def index(self, site: Site) -> int:
        return site[1] * self.width + site[0]

    def around(self, index: int) -> List[int]:
        """The site and its 4-neighbors inside the layer, bonded or not"""
        x, y = index % self.width, index // self.width
        out = [index]
        if y > 0:
            out.append(index - self.width)
        if x < self.width - 1:
            out.append(index + 1)
        if y < self.height - 1:
            out.append(index + self.width)
        if x > 0:
            out.append(index - 1)
        return out


def connected_borders(
    grid: SiteGrid, allowed: Set[int], sources: Sequence[int], targets: Sequence[int]
) -> bool:
    """Disjoint-set check that some source reaches some target inside allowed"""
    ds = DisjointSet()
    for site in allowed:
        for other in grid.adj[site]:
            if other in allowed:
                ds.union(site, other)
    for site in sources:
        ds.union("source", site)
    for site in targets:
        ds.union("target", site)
    return ds.connected("source", "target")


def component_roots(grid: SiteGrid) -> List[Hashable]:
    """Disjoint-set root of every site over all bonds of the layer"""
    ds = DisjointSet()
    for site, others in enumerate(grid.adj):
        for other in others:
            if other > site:
                ds.union(site, other)
    return [ds.find(site) for site in range(len(grid.adj))]


def shortest_path(
    grid: SiteGrid, allowed: Set[int], sources: Sequence[int], targets: Set[int]
) -> Optional[List[int]]:
    """Multi-source BFS inside allowed, neighbors in (up, right, down, left)"""
    parent: Dict[int, Optional[int]] = {}
    queue: deque = deque()
    for site in sources:
        if site in allowed and site not in parent:
            parent[site] = None
            queue.append(site)
    while queue:
        current = queue.popleft()
        if current in targets:
            path = [current]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])  # type: ignore[arg-type]
            return path[::-1]
        for other in grid.adj[current]:
            if other in allowed and other not in parent:
                parent[other] = current
                queue.append(other)
    return None


def _search(
    grid: SiteGrid, allowed: Set[int], sources: List[int], targets: List[int]
) -> Optional[List[int]]:
    sources = [s for s in sources if s in allowed]
    targets = [t for t in targets if t in allowed]
    if not sources or not targets:
        return None
    if not connected_borders(grid, allowed, sources, targets):
        return None
    return shortest_path(grid, allowed, sources, set(targets))


def carve_module(
    grid: SiteGrid,
    module: Module,
    node_size: int,
    required: Optional[Tuple[int, int]] = None,
) -> ModulePaths:
    """Alternating band searches inside one module.

    With required set, the search stops as soon as fewer lines than required
    remain possible in either orientation.
    """
    w = grid.width
    columns = (module.x1 - module.x0) // node_size
    rows = (module.y1 - module.y0) // node_size
    blocked: Dict[str, Set[int]] = {"v": set(), "h": set()}
    result = ModulePaths(module)
    failures = {"v": 0, "h": 0}
    for step in range(max(columns, rows)):
        for orientation, count in (("v", columns), ("h", rows)):
            if step >= count:
                continue
            if required is not None:
                spare = columns - required[0], rows - required[1]
                if failures[orientation] > spare[orientation == "h"]:
                    return result
            if orientation == "v":
                x0 = module.x0 + step * node_size
                band = [
                    y * w + x
                    for y in range(module.y0, module.y1)
                    for x in range(x0, x0 + node_size)
                ]
                sources = [module.y0 * w + x for x in range(x0, x0 + node_size)]
                targets = [(module.y1 - 1) * w + x for x in range(x0, x0 + node_size)]
            else:
                y0 = module.y0 + step * node_size
                band = [
                    y * w + x
                    for y in range(y0, y0 + node_size)
                    for x in range(module.x0, module.x1)
                ]
                sources = [y * w + module.x0 for y in range(y0, y0 + node_size)]
                targets = [y * w + module.x1 - 1 for y in range(y0, y0 + node_size)]
            allowed = set(band) - blocked[orientation]
            path = _search(grid, allowed, sources, targets)
            lines = result.vertical if orientation == "v" else result.horizontal
            if path is None:
                failures[orientation] += 1
                lines.append(None)
                continue
            for site in path:
                blocked[orientation].update(grid.around(site))
            lines.append([grid.site(i) for i in path])
    return result


def _corridor(
    grid: SiteGrid,
    start: Site,
    goal: Site,
    region: Set[int],
    blocked: Set[int],
) -> Optional[List[Site]]:
    """Path from start to goal whose interior stays in the corridor region"""
    begin, end = grid.index(start), grid.index(goal)
    allowed = (region - blocked) | {begin, end}
    path = _search(grid, allowed, [begin], [end])
    if path is None:
        return None
    return [grid.site(i) for i in path]


def _corridor_region(
    grid: SiteGrid, orientation: str, outer: Tuple[int, int], gap: Tuple[int, int]
) -> Set[int]:
    """Interval sites between two modules, within the outer span"""
    if orientation == "v":
        cells = [(x, y) for y in range(*gap) for x in range(*outer)]
    else:
        cells = [(x, y) for y in range(*outer) for x in range(*gap)]
    return {grid.index(cell) for cell in cells}


def _stitch(
    grid: SiteGrid,
    layout: ModuleLayout,
    carved: Dict[Tuple[int, int], ModulePaths],
    orientation: str,
) -> List[List[Site]]:
    """Join module paths into complete lines across the interval corridors"""
    lines: List[List[Site]] = []
    if orientation == "v":
        outer_spans, inner_spans = layout.x_spans, layout.y_spans
    else:
        outer_spans, inner_spans = layout.y_spans, layout.x_spans
    for a, outer in enumerate(outer_spans):
        per_module: List[List[Optional[List[Site]]]] = []
        for b in range(len(inner_spans)):
            paths = carved[(a, b) if orientation == "v" else (b, a)]
            found = paths.vertical if orientation == "v" else paths.horizontal
            per_module.append(found)
        # every same-orientation piece keeps corridors of other lines away
        occupied = {
            grid.index(site)
            for found in per_module
            for piece in found
            if piece
            for site in piece
        }
        taken: Set[int] = set()
        for band in range(layout.bands(*outer)):
            pieces = [found[band] for found in per_module if band < len(found)]
            complete = [piece for piece in pieces if piece is not None]
            if len(complete) < len(inner_spans):
                continue
            own = {grid.index(site) for piece in complete for site in piece}
            guard = {n for site in (occupied - own) | taken for n in grid.around(site)}
            line = list(complete[0])
            for b in range(1, len(inner_spans)):
                gap = (inner_spans[b - 1][1], inner_spans[b][0])
                region = _corridor_region(grid, orientation, outer, gap)
                bridge = _corridor(grid, line[-1], complete[b][0], region, guard)
                if bridge is None:
                    break
                line.extend(bridge[1:-1])
                line.extend(complete[b])
            else:
                taken.update({grid.index(site) for site in line} - own)
                lines.append(line)
    return lines


def carve_lattice(
    layer: MergedLayer,
    rc: RenormConfig,
    workers: int = 1,
    required: Optional[Tuple[int, int]] = None,
) -> RenormalizedLattice:
    """Best-effort coarse lattice; modules are carved concurrently"""
    layout = rc.layout(layer.width, layer.height)
    grid = SiteGrid(layer)
    modules = layout.modules
    single = required if len(modules) == 1 else None

    def carve(module: Module) -> ModulePaths:
        return carve_module(grid, module, rc.node_size, single)

    if workers > 1 and len(modules) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(carve, modules))
    else:
        results = [carve(module) for module in modules]
    carved = {(r.module.column, r.module.row): r for r in results}
    vertical = _stitch(grid, layout, carved, "v")
    horizontal = _stitch(grid, layout, carved, "h")
    return RenormalizedLattice.from_lines(vertical, horizontal)


def renormalize_2d(
    layer: MergedLayer,
    rc: RenormConfig,
    target: Optional[Tuple[int, int]] = None,
    workers: int = 1,
) -> Optional[RenormalizedLattice]:
    """Lattice of exactly the target size, or None when it cannot be carved.

    The default target is every band of the module layout.
    """
    width, height = target or rc.target(layer.width, layer.height)
    lattice = carve_lattice(layer, rc, workers, required=(width, height))
    if lattice.width < width or lattice.height < height:
        return None
    return lattice.truncated(width, height)


def unlimited_lattice_size(layer: MergedLayer, node_size: int) -> int:
    """Nodes of the non-modular lattice searched without a time limit"""
    return carve_lattice(layer, RenormConfig(node_size=node_size)).size


def lattice_violations(
    lattice: RenormalizedLattice, layer: Optional[MergedLayer] = None
) -> List[str]:
    """Structural problems of a carved lattice; empty when valid"""
    problems = []
    seen: Dict[Site, CoarseNode] = {}
    for node, region in lattice.regions.items():
        for site in region:
            if site in seen:
                problems.append(f"regions of {seen[site]} and {node} share {site}")
            seen[site] = node
        k, j = node
        rep = lattice.rep[node]
        on_lines = lattice.vertical_paths[k] + lattice.horizontal_paths[j]
        if on_lines.count(rep) != 2:
            problems.append(f"representative of {node} is off its lines")
    for name, paths in (
        ("vertical", lattice.vertical_paths),
        ("horizontal", lattice.horizontal_paths),
    ):
        for i, path in enumerate(paths):
            near = {
                (x + dx, y + dy)
                for x, y in path
                for dx, dy in ((0, 0), (0, -1), (1, 0), (0, 1), (-1, 0))
            }
            for later, other in enumerate(paths[i + 1 :], start=i + 1):
                if near.intersection(other):
                    problems.append(f"{name} paths {i} and {later} touch")
            for a, b in zip(path, path[1:]):
                if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                    problems.append(f"{name} path {i} jumps from {a} to {b}")
                elif layer is not None and not layer.bonded(a, b):
                    problems.append(f"{name} path {i} uses missing bond {a}-{b}")
    for a, b in lattice.edges():
        ka, ja = a
        kb, jb = b
        if abs(ka - kb) + abs(ja - jb) != 1:
            problems.append(f"coarse edge {a}-{b} is not between neighbors")
    return problems
