"""Immersed walls: busts, punctured graphs, nuclei, tunnels, and their lifts.

A wall is assembled from the graph's mid-level copy punctured at a set of
busts (one periodic point per exponential edge, plus all their L-fold flow
preimages), with two copies of each bust's depth-L preimage tree glued back
along the punctures.  Lifting a wall into a ball, flowing it forward, and
scanning the resulting zones are the desk-scale separation primitives.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from .graph import Graph, GraphMap
from .strata import Stratum
from .torus import BallComplex
from .flow import (
    BallPoint,
    PointV,
    Tunnel,
    ball_preimages,
    flow_power,
    flow_step_ball,
    periodic_points,
    tunnel,
)


class WallError(ValueError):
    pass


# ---------------------------------------------------------------------------
# busts


@dataclass(frozen=True)
class CanonicalBusts:
    points: Tuple[PointV, ...]
    periods: Tuple[int, ...]

    @property
    def lcm(self) -> int:
        out = 1
        for p in self.periods:
            out = out * p // math.gcd(out, p)
        return out


def canonical_busts(
    phi: GraphMap, strata: Sequence[Stratum], period_bound: int = 12
) -> CanonicalBusts:
    """One periodic regular interior point per exponential edge: smallest
    period first, smallest position as the tie-break."""
    points: List[PointV] = []
    periods: List[int] = []
    for s in strata:
        if s.kind != "exponential":
            continue
        for e in s.edges:
            best: Optional[PointV] = None
            best_period = 0
            for m in range(1, period_bound + 1):
                pts, _ = periodic_points(phi, e, m)
                exact = [p for p in pts if p.period == m]
                if exact:
                    best = min(exact, key=lambda r: r.point.s).point
                    best_period = m
                    break
            if best is None:
                raise WallError(
                    f"no periodic interior point in edge {e!r} up to period {period_bound}"
                )
            points.append(best)
            periods.append(best_period)
    return CanonicalBusts(tuple(points), tuple(periods))


@dataclass(frozen=True)
class SecondaryBust:
    point: PointV
    primary_index: int
    sign: int  # orientation of the L-fold branch onto the primary


@dataclass
class BustSet:
    """Primary busts with their depth-L preimage trees and derived secondaries."""

    primaries: Tuple[PointV, ...]
    tunnel_length: int
    tunnels: Tuple[Tunnel, ...]
    periodic: Tuple[bool, ...]
    secondaries: Tuple[Tuple[SecondaryBust, ...], ...]

    def all_secondary_points(self) -> List[PointV]:
        return sorted({sb.point for per in self.secondaries for sb in per})

    def puncture_points(self) -> List[PointV]:
        return sorted(set(self.primaries) | set(self.all_secondary_points()))


def secondary_busts(phi: GraphMap, primaries: Sequence[PointV], length: int) -> BustSet:
    """Depth-L preimages of each primary, with branch orientations.

    Primaries must have disjoint forward orbits; a bust of one primary
    coinciding with another primary's preimage set is a construction error.
    """
    if length < 1:
        raise WallError("tunnel length must be >= 1")
    prim = tuple(primaries)
    for p in prim:
        if p.is_vertex:
            raise WallError("busts must be interior points")
    for i, p in enumerate(prim):
        for j, q in enumerate(prim):
            if i < j:
                a, b = p, q
                for n in range(2 * length + 1):
                    if a == b:
                        raise WallError(
                            f"primary busts {i} and {j} share a forward orbit point"
                        )
                    a, b = flow_power(phi, a, 1), flow_power(phi, b, 1)
    tunnels = tuple(tunnel(phi, p, length) for p in prim)
    periodic = tuple(flow_power(phi, p, length) == p for p in prim)
    secondaries: List[Tuple[SecondaryBust, ...]] = []
    for i, t in enumerate(tunnels):
        per: List[SecondaryBust] = []
        for leaf in t.leaves:
            sign = leaf.sign
            node = leaf
            level = len(t.levels) - 1
            while node.parent is not None:
                node = t.levels[level][node.parent]
                sign *= node.sign
                level -= 1
            per.append(SecondaryBust(leaf.point, i, sign))
        secondaries.append(tuple(per))
    flat: Dict[PointV, int] = {}
    for i, per in enumerate(secondaries):
        for sb in per:
            if sb.point in flat and flat[sb.point] != i:
                raise WallError(
                    f"secondary busts of primaries {flat[sb.point]} and {i} coincide"
                )
            flat[sb.point] = i
    for i, p in enumerate(prim):
        owner = flat.get(p)
        if owner is not None and owner != i:
            raise WallError(f"primary bust {i} hits the preimage set of {owner}")
    return BustSet(prim, length, tunnels, periodic, tuple(secondaries))


# ---------------------------------------------------------------------------
# the punctured mid-level graph

Node = Tuple  # ("gv", v) | ("end", edge, s, "lo"/"hi") | ("ext", i)


@dataclass(frozen=True)
class SegmentCell:
    edge: str
    lo: Fraction
    hi: Fraction
    node_lo: Node
    node_hi: Node


@dataclass(frozen=True)
class NucleusData:
    index: int
    nodes: FrozenSet[Node]
    segments: Tuple[int, ...]  # indices into PuncturedGraph.segments
    vertices: Tuple[str, ...]


@dataclass
class PuncturedGraph:
    """The graph cut open at a finite set of interior points.

    End vertices cap the two sides of every puncture; extra isolated vertices
    may be added.  Components are the nuclei."""

    graph: Graph
    punctures: Dict[str, List[Fraction]]
    segments: List[SegmentCell]
    extra_nodes: Tuple[Node, ...]
    nuclei: List[NucleusData] = field(default_factory=list)
    node_nucleus: Dict[Node, int] = field(default_factory=dict)

    def nucleus_of(self, node: Node) -> NucleusData:
        return self.nuclei[self.node_nucleus[node]]


def build_eflat(
    graph: Graph,
    points: Sequence[PointV],
    extra_count: int = 0,
) -> PuncturedGraph:
    """Puncture the graph at the given interior points; components become nuclei."""
    punctures: Dict[str, List[Fraction]] = {}
    for p in points:
        if p.is_vertex:
            raise WallError("punctures must be interior points")
        punctures.setdefault(p.edge, []).append(p.s)
    for e, ss in punctures.items():
        if len(set(ss)) != len(ss):
            raise WallError(f"repeated puncture on edge {e!r}")
        ss.sort()
    segments: List[SegmentCell] = []
    for e in graph.positive_edges:
        rec = graph.edge(e)
        cuts = punctures.get(e, [])
        breaks: List[Tuple[Fraction, Node]] = [(Fraction(0), ("gv", rec.src))]
        for s in cuts:
            breaks.append((s, ("end", e, s, "lo")))
            breaks.append((s, ("end", e, s, "hi")))
        breaks.append((Fraction(1), ("gv", rec.dst)))
        for k in range(0, len(breaks) - 1, 2):
            (lo, nlo), (hi, nhi) = breaks[k], breaks[k + 1]
            segments.append(SegmentCell(e, lo, hi, nlo, nhi))
    extra = tuple(("ext", i) for i in range(extra_count))
    pg = PuncturedGraph(graph, punctures, segments, extra)
    _compute_nuclei(pg)
    return pg


def _compute_nuclei(pg: PuncturedGraph) -> None:
    parent: Dict[Node, Node] = {}

    def find(x: Node) -> Node:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: Node, b: Node) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for v in pg.graph.vertices:
        find(("gv", v))
    for n in pg.extra_nodes:
        find(n)
    for seg in pg.segments:
        union(seg.node_lo, seg.node_hi)
    groups: Dict[Node, List[Node]] = {}
    for n in list(parent):
        groups.setdefault(find(n), []).append(n)
    pg.nuclei = []
    pg.node_nucleus = {}
    seg_by_node: Dict[Node, List[int]] = {}
    for idx, seg in enumerate(pg.segments):
        seg_by_node.setdefault(seg.node_lo, []).append(idx)
        seg_by_node.setdefault(seg.node_hi, []).append(idx)
    for root in sorted(groups, key=str):
        nodes = frozenset(groups[root])
        segs = sorted({i for n in nodes for i in seg_by_node.get(n, [])})
        verts = tuple(sorted(n[1] for n in nodes if n[0] == "gv"))
        nd = NucleusData(len(pg.nuclei), nodes, tuple(segs), verts)
        pg.nuclei.append(nd)
        for n in nodes:
            pg.node_nucleus[n] = nd.index
    pg.nuclei.sort(key=lambda nd: nd.index)


# ---------------------------------------------------------------------------
# the immersed wall


@dataclass(frozen=True)
class WallCell:
    """One 1-cell of the wall graph, with fiber signs at its two endpoints.

    The transverse line bundle along the wall is flat away from corners and
    branch turns; a cycle's holonomy is the product of its end signs."""

    id: Tuple
    kind: str  # "seg" | "root" | "piece" | "leaf"
    a: Node
    b: Node
    sign_a: int
    sign_b: int
    data: Tuple = ()


TNode = Tuple  # ("tn", primary, copy, depth, index)


def _end_node(bs: BustSet, point: PointV, sem: str, sign: int) -> Node:
    geo = "lo" if (sem == "lt") == (sign > 0) else "hi"
    return ("end", point.edge, point.s, geo)


class ImmersedWall:
    """The glued union of nuclei and tunnel copies, with component data."""

    def __init__(self, phi: GraphMap, busts: BustSet):
        self.phi = phi
        self.busts = busts
        n_ext = sum(1 for f in busts.periodic if f)
        self._ext_index = {}
        k = 0
        for i, f in enumerate(busts.periodic):
            if f:
                self._ext_index[i] = k
                k += 1
        self.punctured = build_eflat(phi.graph, busts.puncture_points(), n_ext)
        self.cells: Dict[Tuple, WallCell] = {}
        self.root_attachment: Dict[Tuple[int, str], Node] = {}
        self.leaf_attachment: Dict[Tuple[int, str, int], Node] = {}
        self._build_cells()
        self._compute_components()

    # -- assembly ---------------------------------------------------------------

    def _add(self, cell: WallCell) -> None:
        self.cells[cell.id] = cell

    def _build_cells(self) -> None:
        bs = self.busts
        for idx, seg in enumerate(self.punctured.segments):
            self._add(
                WallCell(("seg", idx), "seg", seg.node_lo, seg.node_hi, +1, +1,
                         (seg.edge, seg.lo, seg.hi))
            )
        for i, t in enumerate(bs.tunnels):
            for copy in ("lt", "rt"):
                self._build_tunnel_cells(i, copy, t)

    def _root_corner_sign(self, node: Node) -> int:
        if node[0] == "ext":
            return +1
        return +1 if node[3] == "lo" else -1

    def _leaf_corner_sign(self, node: Node) -> int:
        if node[0] == "ext":
            return +1
        return +1 if node[3] == "hi" else -1

    def _build_tunnel_cells(self, i: int, copy: str, t: Tunnel) -> None:
        bs = self.busts
        periodic = bs.periodic[i]
        d = bs.primaries[i]
        if copy == "lt" or not periodic:
            root_at = _end_node(bs, d, copy, +1)
        else:
            root_at = ("ext", self._ext_index[i])
        self.root_attachment[(i, copy)] = root_at
        v0: TNode = ("tn", i, copy, 0, 0)
        self._add(
            WallCell(("root", i, copy), "root", root_at, v0,
                     self._root_corner_sign(root_at), +1)
        )
        for k in range(1, len(t.levels)):
            for idx, node in enumerate(t.levels[k]):
                parent: TNode = ("tn", i, copy, k - 1, node.parent)
                child: TNode = ("tn", i, copy, k, idx)
                self._add(
                    WallCell(("piece", i, copy, k, idx), "piece", child, parent,
                             +1, node.sign)
                )
        opposite = {"lt": "rt", "rt": "lt"}[copy]
        for li, leaf in enumerate(t.leaves):
            sb = bs.secondaries[i][li]
            if periodic and copy == "rt" and sb.point == d:
                att: Node = ("ext", self._ext_index[i])
            else:
                att = _end_node(bs, sb.point, opposite, sb.sign)
            self.leaf_attachment[(i, copy, li)] = att
            parent = ("tn", i, copy, len(t.levels) - 1, leaf.parent)
            self._add(
                WallCell(("leaf", i, copy, li), "leaf", att, parent,
                         self._leaf_corner_sign(att), leaf.sign)
            )

    def _compute_components(self) -> None:
        parent: Dict[Node, Node] = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb

        for nd in self.punctured.nuclei:
            for n in nd.nodes:
                find(n)
        for cell in self.cells.values():
            union(cell.a, cell.b)
        groups: Dict[Node, Set[Node]] = {}
        for n in list(parent):
            groups.setdefault(find(n), set()).add(n)
        comps = sorted(groups.values(), key=lambda s: str(sorted(map(str, s))))
        self.components: List[FrozenSet[Node]] = [frozenset(c) for c in comps]
        self.node_component: Dict[Node, int] = {}
        for ci, comp in enumerate(self.components):
            for n in comp:
                self.node_component[n] = ci
        if self.busts.primaries:
            seed_node = _end_node(self.busts, self.busts.primaries[0], "lt", +1)
            self.seed_component = self.node_component[seed_node]
        else:
            self.seed_component = 0
        self.degenerate = not self.busts.primaries

    # -- component views ----------------------------------------------------------

    def component_nuclei(self, ci: Optional[int] = None) -> List[NucleusData]:
        ci = self.seed_component if ci is None else ci
        return [
            nd
            for nd in self.punctured.nuclei
            if any(self.node_component.get(n) == ci for n in nd.nodes)
        ]

    def component_tunnels(self, ci: Optional[int] = None) -> List[Tuple[int, str]]:
        ci = self.seed_component if ci is None else ci
        out = []
        for i in range(len(self.busts.tunnels)):
            for copy in ("lt", "rt"):
                if self.node_component.get(("tn", i, copy, 0, 0)) == ci:
                    out.append((i, copy))
        return out

    def crossing_profile(
        self,
        ci: Optional[int] = None,
        exclude_tunnels: Sequence[Tuple[int, str]] = (),
    ) -> Tuple[Dict[str, List[Fraction]], Set[str]]:
        """Where the wall meets the 1-skeleton: interior points per vertical
        edge (with multiplicity, from every tunnel copy) and the vertices whose
        mid-level copies belong to the wall."""
        ci = self.seed_component if ci is None else ci
        excluded = set(exclude_tunnels)
        on_edge: Dict[str, List[Fraction]] = {}
        for (i, copy) in self.component_tunnels(ci):
            if (i, copy) in excluded:
                continue
            t = self.busts.tunnels[i]
            for level in t.levels:
                for node in level:
                    on_edge.setdefault(node.point.edge, []).append(node.point.s)
        verts = {
            n[1]
            for nd in self.component_nuclei(ci)
            for n in nd.nodes
            if n[0] == "gv"
        }
        for e in on_edge:
            on_edge[e].sort()
        return on_edge, verts


def build_immersed_wall(phi: GraphMap, busts: BustSet) -> ImmersedWall:
    return ImmersedWall(phi, busts)


# ---------------------------------------------------------------------------
# zoology and checks


@dataclass(frozen=True)
class NucleusClass:
    index: int
    kind: int  # 1, 2, 3
    trivial: bool
    detail: str = ""


def classify_nuclei(wall: ImmersedWall, ci: Optional[int] = None) -> List[NucleusClass]:
    """Sort every nucleus into the three shapes the construction can produce."""
    bs = wall.busts
    primary_pts = set(bs.primaries)
    secondary_pts = set(bs.all_secondary_points())
    out = []
    for nd in wall.component_nuclei(ci):
        ext_nodes = [n for n in nd.nodes if n[0] == "ext"]
        if ext_nodes and len(nd.nodes) == 1:
            out.append(NucleusClass(nd.index, 1, True, "extra vertex"))
            continue
        if nd.vertices:
            out.append(NucleusClass(nd.index, 3, False, f"vertices {nd.vertices}"))
            continue
        if len(nd.segments) == 1:
            seg = wall.punctured.segments[nd.segments[0]]
            ends = [PointV(seg.edge, seg.lo), PointV(seg.edge, seg.hi)]
            n_primary = sum(1 for p in ends if p in primary_pts)
            n_secondary = sum(1 for p in ends if p in secondary_pts and p not in primary_pts)
            if n_primary == 1:
                out.append(NucleusClass(nd.index, 1, False, "primary+secondary interval"))
                continue
            if n_primary == 0 and n_secondary == 2:
                out.append(NucleusClass(nd.index, 2, False, "secondary+secondary interval"))
                continue
        raise WallError(f"nucleus {nd.index} fits no recipe shape")
    return out


@dataclass
class CocycleReport:
    cell_counts: Dict[str, int]
    odd_cells: List[str]
    holonomies: List[Tuple[str, int]]

    @property
    def all_even(self) -> bool:
        return not self.odd_cells

    @property
    def two_sided(self) -> bool:
        return all(h == +1 for _, h in self.holonomies)


def cocycle_check(
    phi: GraphMap,
    wall: ImmersedWall,
    ci: Optional[int] = None,
    exclude_tunnels: Sequence[Tuple[int, str]] = (),
) -> CocycleReport:
    """Count wall crossings of every 2-cell boundary, and transverse-bundle
    holonomy along a cycle basis of the wall graph.

    Every boundary word crosses the wall evenly exactly when the wall's
    mod-2 class vanishes on 2-cells, which is what makes its lifts separate
    the universal cover.
    """
    on_edge, verts = wall.crossing_profile(ci, exclude_tunnels)
    counts: Dict[str, int] = {}
    odd: List[str] = []
    for e in phi.graph.positive_edges:
        rec = phi.graph.edge(e)
        c = len(on_edge.get(e, []))
        c += 1 if rec.src in verts else 0
        c += 1 if rec.dst in verts else 0
        for letter in phi.edge_map[e].edges:
            c += len(on_edge.get(phi.graph.positive(letter), []))
        counts[e] = c
        if c % 2:
            odd.append(e)

    holonomies = _holonomy_basis(wall, ci, exclude_tunnels)
    return CocycleReport(counts, odd, holonomies)


def _holonomy_basis(
    wall: ImmersedWall,
    ci: Optional[int],
    exclude_tunnels: Sequence[Tuple[int, str]],
) -> List[Tuple[str, int]]:
    ci = wall.seed_component if ci is None else ci
    excluded = set(exclude_tunnels)
    cells = [
        c
        for c in wall.cells.values()
        if wall.node_component.get(c.a) == ci
        and not (c.kind in ("root", "piece", "leaf") and (c.id[1], c.id[2]) in excluded)
    ]
    adj: Dict[Node, List[WallCell]] = {}
    for c in cells:
        adj.setdefault(c.a, []).append(c)
        adj.setdefault(c.b, []).append(c)
    if not adj:
        return []
    start = min(adj, key=str)
    tree_sign: Dict[Node, int] = {start: +1}
    in_tree: Set[Tuple] = set()
    queue = [start]
    while queue:
        v = queue.pop()
        for c in sorted(adj[v], key=lambda c: str(c.id)):
            other = c.b if c.a == v else c.a
            if other in tree_sign:
                continue
            in_tree.add(c.id)
            sv = c.sign_a * c.sign_b
            tree_sign[other] = tree_sign[v] * sv
            queue.append(other)
    out = []
    for c in sorted(cells, key=lambda c: str(c.id)):
        if c.id in in_tree:
            continue
        if c.a not in tree_sign or c.b not in tree_sign:
            continue
        hol = tree_sign[c.a] * tree_sign[c.b] * c.sign_a * c.sign_b
        out.append((str(c.id), hol))
    return out


@dataclass
class SeparationReport:
    table: Dict[Tuple[int, str], bool]
    failing: Optional[Tuple[int, str]]

    @property
    def all_separated(self) -> bool:
        return self.failing is None


def bust_separation_check(
    phi: GraphMap,
    busts: BustSet,
    extra_targets: Sequence[PointV] = (),
) -> SeparationReport:
    """Is every primary bust cut off from every vertex (and extra target) by a
    secondary bust?  Exact, by component scan of the graph punctured at the
    other secondaries."""
    g = phi.graph
    table: Dict[Tuple[int, str], bool] = {}
    failing: Optional[Tuple[int, str]] = None
    for i, d in enumerate(busts.primaries):
        cuts = [p for p in busts.all_secondary_points() if p != d]
        pg = build_eflat(g, cuts)
        seg_of_d = None
        for seg in pg.segments:
            if seg.edge == d.edge and seg.lo < d.s < seg.hi:
                seg_of_d = seg
                break
        assert seg_of_d is not None
        home = pg.nucleus_of(seg_of_d.node_lo)
        reachable = set(home.vertices)
        for v in sorted(g.vertices):
            ok = v not in reachable
            table[(i, f"vertex:{v}")] = ok
            if not ok and failing is None:
                failing = (i, f"vertex:{v}")
        for tgt in extra_targets:
            if tgt.is_vertex:
                ok = tgt.vertex not in reachable
            else:
                ok = True
                for seg in pg.segments:
                    if seg.edge == tgt.edge and seg.lo < tgt.s < seg.hi:
                        ok = pg.node_nucleus[seg.node_lo] != home.index
                        break
            key = (i, f"point:{tgt}")
            table[key] = ok
            if not ok and failing is None:
                failing = key
    return SeparationReport(table, failing)


# ---------------------------------------------------------------------------
# lifting a wall into a ball

Anchor = Tuple  # ("c", vcell, s) | ("h", lower vertex label)
State = Tuple[Node, Anchor]


@dataclass
class WallTrace:
    """One connected lift of an immersed wall inside a ball.

    Crossing data is stored per 1-cell of the ball; nucleus and tunnel lifts
    are grouped so approximations and zones can be computed piecewise."""

    wall: ImmersedWall
    ball: BallComplex
    seed_state: State
    states: Dict[State, int] = field(default_factory=dict)
    crossings_v: Dict[Tuple[str, str], List[Tuple[Fraction, int]]] = field(default_factory=dict)
    crossings_h: Dict[str, List[Tuple[Fraction, int]]] = field(default_factory=dict)
    nucleus_lifts: List[Dict] = field(default_factory=list)
    tunnel_lifts: List[Dict] = field(default_factory=list)
    truncated: bool = False

    def crossing_cells(self) -> Set[Tuple]:
        out: Set[Tuple] = set(self.crossings_v)
        out |= {("h", h) for h in self.crossings_h}
        return out


def _tn_point(wall: ImmersedWall, node: TNode) -> PointV:
    _, i, copy, k, idx = node
    return wall.busts.tunnels[i].levels[k][idx].point


def _att_point(wall: ImmersedWall, node: Node) -> PointV:
    if node[0] == "end":
        return PointV(node[1], node[2])
    if node[0] == "ext":
        for i, k in wall._ext_index.items():
            if k == node[1]:
                return wall.busts.primaries[i]
    raise WallError(f"not an attachment node: {node}")


def lift_wall(wall: ImmersedWall, ball: BallComplex, seed: Tuple[Tuple[str, str], Fraction]) -> WallTrace:
    """Unfold the wall through the ball starting from a seed bust point.

    `seed` is (vertical cell id, position); the position must be a bust of the
    wall.  Cells that would leave the ball truncate the trace and set a flag.
    """
    vcell, s = seed
    if vcell not in ball.vertical:
        raise WallError("seed cell is not in the ball")
    pt = PointV(ball.vertical[vcell].edge, Fraction(s))
    seed_nodes = [
        n
        for nd in wall.punctured.nuclei
        for n in nd.nodes
        if n[0] == "end" and n[1] == pt.edge and n[2] == pt.s
    ]
    if not seed_nodes:
        raise WallError(f"seed point {pt} is not a bust of the wall")
    seed_node = min(seed_nodes, key=str)
    trace = WallTrace(wall, ball, (seed_node, ("c", vcell, pt.s)))

    cells_at: Dict[Node, List[WallCell]] = {}
    for c in wall.cells.values():
        cells_at.setdefault(c.a, []).append(c)
        cells_at.setdefault(c.b, []).append(c)

    vcells_by_dst: Dict[Tuple[str, str], List[Tuple[str, str]]] = {}
    for vid, cell in ball.vertical.items():
        vcells_by_dst.setdefault((cell.dst, cell.edge), []).append(vid)

    def place(node: Node, anchor: Anchor) -> Optional[int]:
        st = (node, anchor)
        if st in trace.states:
            return None
        idx = len(trace.states)
        trace.states[st] = idx
        if node[0] == "tn":
            p = _tn_point(wall, node)
            trace.crossings_v.setdefault(anchor[1], []).append((p.s, idx))
        if node[0] == "gv":
            trace.crossings_h.setdefault(anchor[1], []).append((Fraction(1, 2), idx))
        return idx

    place(*trace.seed_state)
    queue = deque([trace.seed_state])
    edges_seen: Set[Tuple[int, int, Tuple]] = set()
    state_edges: List[Tuple[State, State, Tuple]] = []

    def visit(st_from: State, node: Node, anchor: Anchor, cell_id: Tuple) -> None:
        st = (node, anchor)
        if st not in trace.states:
            place(node, anchor)
            queue.append(st)
        a, b = trace.states[st_from], trace.states[st]
        key = (min(a, b), max(a, b), cell_id)
        if key not in edges_seen:
            edges_seen.add(key)
            state_edges.append((st_from, st, cell_id))

    cells_sorted = {
        n: sorted(cs, key=lambda c: str(c.id)) for n, cs in cells_at.items()
    }
    while queue:
        st = queue.popleft()
        node, anchor = st
        for c in cells_sorted.get(node, []):
            other = c.b if c.a == node else c.a
            res = _transport(wall, ball, node, anchor, other, c, vcells_by_dst)
            if res is None:
                trace.truncated = True
                continue
            visit(st, other, res, c.id)

    _group_lifts(trace, state_edges)
    for lst in trace.crossings_v.values():
        lst.sort()
    return trace


def _transport(
    wall: ImmersedWall,
    ball: BallComplex,
    node: Node,
    anchor: Anchor,
    other: Node,
    cell: WallCell,
    vcells_by_dst,
) -> Optional[Anchor]:
    """Anchor of `other` across `cell` from a placed node, or None if the ball
    is missing the geometry."""
    if cell.kind == "seg":
        edge, lo, hi = cell.data
        other_is_lo = other == cell.a
        if anchor[0] == "c":
            vc = anchor[1]
            if ball.square_above(vc) is None:
                return None
            if other[0] == "end":
                return ("c", vc, other[2])
            label = ball.vertical[vc].src if other_is_lo else ball.vertical[vc].dst
            return ("h", label) if label in ball.horizontal else None
        # current node is a graph vertex sitting at a horizontal midpoint
        label = anchor[1]
        from_lo = node == cell.a
        if from_lo:
            vc = (label, edge)
            if vc not in ball.vertical:
                return None
        else:
            cands = sorted(vcells_by_dst.get((label, edge), []))
            if not cands:
                return None
            vc = cands[0]
        if ball.square_above(vc) is None:
            return None
        if other[0] == "end":
            return ("c", vc, other[2])
        lbl2 = ball.vertical[vc].src if other_is_lo else ball.vertical[vc].dst
        return ("h", lbl2) if lbl2 in ball.horizontal else None
    if cell.kind == "root":
        # attachment and top tunnel node share coordinates on the same cell
        if other[0] == "tn":
            return ("c", anchor[1], _tn_point(wall, other).s)
        if ball.square_above(anchor[1]) is None:
            return None
        return ("c", anchor[1], _att_point(wall, other).s)
    if cell.kind in ("piece", "leaf"):
        down_node, up_node = cell.a, cell.b
        if node == up_node:
            target = (
                _tn_point(wall, down_node)
                if down_node[0] == "tn"
                else _att_point(wall, down_node)
            )
            p = BallPoint(anchor[1], anchor[2])
            for bp, _sign in ball_preimages(ball, p):
                if bp.project(ball) == target:
                    return ("c", bp.vcell, bp.s)
            return None
        p = BallPoint(anchor[1], anchor[2])
        nxt = flow_step_ball(ball, p)
        if nxt is None or isinstance(nxt, str):
            return None
        return ("c", nxt.vcell, nxt.s)
    raise WallError(f"unknown cell kind {cell.kind}")


def _group_lifts(trace: WallTrace, state_edges: List[Tuple[State, State, Tuple]]) -> None:
    wall = trace.wall
    parent: Dict[State, State] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for st in trace.states:
        find(st)
    nucleus_nodes = {
        n: nd.index for nd in wall.punctured.nuclei for n in nd.nodes
    }
    for a, b, cid in state_edges:
        if cid[0] == "seg":
            union(a, b)
    groups: Dict[State, List[State]] = {}
    for st in trace.states:
        if st[0][0] in ("gv", "end", "ext"):
            groups.setdefault(find(st), []).append(st)
    seg_edges_by_root: Dict[State, List[Tuple[State, State, Tuple]]] = {}
    for a, b, cid in state_edges:
        if cid[0] == "seg":
            seg_edges_by_root.setdefault(find(a), []).append((a, b, cid))
    for root in sorted(groups, key=str):
        members = groups[root]
        nuc = nucleus_nodes[members[0][0]]
        segments: List[Tuple[Tuple[str, str], Fraction, Fraction]] = []
        anchors = {st[0]: st[1] for st in members}
        for a, b, cid in seg_edges_by_root.get(root, []):
            seg = wall.punctured.segments[cid[1]]
            vc = a[1][1] if a[1][0] == "c" else (b[1][1] if b[1][0] == "c" else None)
            if vc is None:
                lo_state = a if a[0] == seg.node_lo else b
                vc = (lo_state[1][1], seg.edge)
            segments.append((vc, seg.lo, seg.hi))
        expected = wall.punctured.nuclei[nuc]
        trace.nucleus_lifts.append(
            {
                "nucleus": nuc,
                "anchors": anchors,
                "segments": sorted(set(segments)),
                "truncated": len(anchors) < len(expected.nodes)
                or len(set(segments)) < len(expected.segments),
            }
        )
    # group tunnel states by walking piece edges from each placed top node
    piece_adj: Dict[State, List[State]] = {}
    for a, b, cid in state_edges:
        if cid[0] == "piece":
            piece_adj.setdefault(a, []).append(b)
            piece_adj.setdefault(b, []).append(a)
    for st in sorted(trace.states, key=str):
        node, anchor = st
        if node[0] != "tn" or node[3] != 0:
            continue
        i, copy = node[1], node[2]
        t = wall.busts.tunnels[i]
        lift_nodes = {node: anchor}
        frontier = [st]
        while frontier:
            cur = frontier.pop()
            for y in piece_adj.get(cur, []):
                if y[0][0] == "tn" and y[0] not in lift_nodes and (y[0][1], y[0][2]) == (i, copy):
                    lift_nodes[y[0]] = y[1]
                    frontier.append(y)
        trace.tunnel_lifts.append(
            {
                "tunnel": (i, copy),
                "root_anchor": anchor,
                "nodes": lift_nodes,
                "truncated": len(lift_nodes) < t.node_count(),
            }
        )


def square_crossing_parities(
    trace: WallTrace, exclude_tunnel_lifts: Sequence[int] = ()
) -> Dict[Tuple[str, str], int]:
    """Crossing count of every ball square's boundary with the trace.

    In the compact quotient, deleting a whole tunnel can be invisible to the
    2-cell parities (its crossings project evenly); in the ball the lift of a
    deleted tunnel leaves its root square with an odd boundary count, so this
    is where mutations are detected."""
    ball = trace.ball
    excluded: Set[int] = set()
    for idx in exclude_tunnel_lifts:
        tl = trace.tunnel_lifts[idx]
        for node, anchor in tl["nodes"].items():
            excluded.add(trace.states[(node, anchor)])
    v_counts = {
        vc: sum(1 for _, st in pts if st not in excluded)
        for vc, pts in trace.crossings_v.items()
    }
    h_counts = {
        h: sum(1 for st in sts if st not in excluded)
        for h, sts in trace.crossings_h.items()
    }
    out = {}
    for sqid, sq in ball.squares.items():
        c = v_counts.get(sq.bottom, 0)
        c += h_counts.get(sq.left, 0) + h_counts.get(sq.right, 0)
        for vid, _ in sq.top:
            c += v_counts.get(vid, 0)
        out[sqid] = c
    return out


# ---------------------------------------------------------------------------
# approximation


def flow_interval(
    ball: BallComplex, vcell: Tuple[str, str], lo: Fraction, hi: Fraction
) -> Optional[Tuple[List[Tuple[Tuple[str, str], Fraction, Fraction]], List[str]]]:
    """Image of an interval of a vertical cell one level up: sub-intervals of
    the cells its square's top crosses, plus the vertices passed through."""
    sq = ball.square_above(vcell)
    if sq is None:
        return None
    k = len(sq.top)
    t0, t1 = k * lo, k * hi
    pieces = []
    hits: List[str] = []
    j0, j1 = int(t0), int(t1)
    for j in range(j0, min(j1, k - 1) + 1):
        a = max(t0 - j, Fraction(0))
        b = min(t1 - j, Fraction(1))
        if a >= b:
            continue
        vid, orient = sq.top[j]
        if orient > 0:
            pieces.append((vid, a, b))
        else:
            pieces.append((vid, 1 - b, 1 - a))
    for j in range(j0 + 1, j1 + 1):
        if t0 < j < t1:
            hits.append(sq.top_vertices[j])
    return pieces, hits


ApproxNode = Tuple


@dataclass
class Approximation:
    """The forward image of a wall trace: level trees joined by flow paths,
    carried with the metric (vertical pieces weighted, flow hops unit)."""

    ball: BallComplex
    depth: int
    nodes: Set[ApproxNode] = field(default_factory=set)
    edges: List[Tuple[ApproxNode, ApproxNode, float, str]] = field(default_factory=list)
    truncated: bool = False
    zone_hits: List[Dict] = field(default_factory=list)
    acyclic: Optional[bool] = None

    def _adj(self):
        adj: Dict[ApproxNode, List[Tuple[ApproxNode, float]]] = {}
        for a, b, w, _ in self.edges:
            adj.setdefault(a, []).append((b, w))
            adj.setdefault(b, []).append((a, w))
        return adj

    def distance(self, a: ApproxNode, b: ApproxNode) -> float:
        adj = self._adj()
        dist = {a: 0.0}
        heap = [(0.0, str(a), a)]
        while heap:
            d, _, v = heapq.heappop(heap)
            if v == b:
                return d
            if d > dist.get(v, float("inf")):
                continue
            for u, w in adj.get(v, []):
                nd = d + w
                if nd < dist.get(u, float("inf")) - 1e-15:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, str(u), u))
        raise WallError("approximation points are not connected")


def _node_of(ball: BallComplex, vcell: Tuple[str, str], s: Fraction) -> ApproxNode:
    if s == 0:
        return ("vx", ball.vertical[vcell].src)
    if s == 1:
        return ("vx", ball.vertical[vcell].dst)
    return ("pt", vcell, s)


def approximate(trace: WallTrace, depth: Optional[int] = None) -> Approximation:
    """Flow the trace forward by its tunnel length (minus a half), collapsing
    tunnels onto their root flow paths and nuclei onto level subtrees."""
    ball = trace.ball
    L = trace.wall.busts.tunnel_length if depth is None else depth
    ap = Approximation(ball, L)
    interval_sets: Dict[Tuple[str, str], List[Tuple[Fraction, Fraction]]] = {}
    cut_points: Dict[Tuple[str, str], Set[Fraction]] = {}
    hop_edges: Set[Tuple[ApproxNode, ApproxNode]] = set()

    def add_interval(vc, lo, hi):
        interval_sets.setdefault(vc, []).append((lo, hi))

    def add_hop(n1, n2):
        key = (n1, n2) if str(n1) <= str(n2) else (n2, n1)
        hop_edges.add(key)

    for tl in trace.tunnel_lifts:
        anchor = tl["root_anchor"]
        p: Union[BallPoint, str, None] = BallPoint(anchor[1], anchor[2])
        prev_node = _node_of(ball, anchor[1], anchor[2])
        cut_points.setdefault(anchor[1], set()).add(anchor[2])
        for _ in range(L):
            assert isinstance(p, BallPoint)
            nxt = flow_step_ball(ball, p)
            if nxt is None:
                ap.truncated = True
                break
            if isinstance(nxt, str):
                node = ("vx", nxt)
                add_hop(prev_node, node)
                ap.truncated = True
                break
            node = _node_of(ball, nxt.vcell, nxt.s)
            cut_points.setdefault(nxt.vcell, set()).add(nxt.s)
            add_hop(prev_node, node)
            prev_node, p = node, nxt

    for nl in trace.nucleus_lifts:
        hits_by_level: Dict[int, List[str]] = {}
        for (vc, lo, hi) in nl["segments"]:
            cur = [(vc, lo, hi)]
            for level in range(1, L + 1):
                nxt_pieces: List[Tuple[Tuple[str, str], Fraction, Fraction]] = []
                for (c, a, b) in cur:
                    res = flow_interval(ball, c, a, b)
                    if res is None:
                        ap.truncated = True
                        continue
                    pieces, hits = res
                    nxt_pieces.extend(pieces)
                    if hits:
                        hits_by_level.setdefault(level, []).extend(hits)
                cur = nxt_pieces
            for (c, a, b) in cur:
                add_interval(c, a, b)
        ap.zone_hits.append(
            {
                "nucleus": nl["nucleus"],
                "hits_by_level": hits_by_level,
                "truncated": nl["truncated"],
            }
        )

    # merge intervals per cell, then cut at interior flow points
    for vc, ivs in sorted(interval_sets.items()):
        ivs = sorted(ivs)
        merged: List[Tuple[Fraction, Fraction]] = []
        for lo, hi in ivs:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
            else:
                merged.append((lo, hi))
        for lo, hi in merged:
            cuts = sorted(
                {lo, hi} | {s for s in cut_points.get(vc, set()) if lo < s < hi}
            )
            for a, b in zip(cuts, cuts[1:]):
                n1, n2 = _node_of(ball, vc, a), _node_of(ball, vc, b)
                w = float(b - a) * ball.vertical[vc].weight
                ap.nodes.update((n1, n2))
                ap.edges.append((n1, n2, w, "level"))
    for n1, n2 in sorted(hop_edges, key=str):
        ap.nodes.update((n1, n2))
        ap.edges.append((n1, n2, 1.0, "flow"))

    parent: Dict[ApproxNode, ApproxNode] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    acyclic = True
    for a, b, _, _ in ap.edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            acyclic = False
        else:
            parent[ra] = rb
    ap.acyclic = acyclic
    return ap


@dataclass(frozen=True)
class ZoneReport:
    nucleus: int
    exceptional: bool
    degenerate: bool
    narrow: Optional[bool]
    window_hits: Tuple[str, ...]


def exceptional_zones(trace: WallTrace, approx: Approximation) -> List[ZoneReport]:
    """Per nucleus lift: the zone between it and its forward image, flagged
    exceptional when a primary bust bounds it, degenerate for extra-vertex
    nuclei, and scanned for vertices in the lower three-quarter window."""
    wall = trace.wall
    L = wall.busts.tunnel_length
    window_top = Fraction(3 * L, 4)
    primary_pts = set(wall.busts.primaries)
    out = []
    for zh in approx.zone_hits:
        nd = wall.punctured.nuclei[zh["nucleus"]]
        has_ext = any(n[0] == "ext" for n in nd.nodes)
        boundary_pts = {
            PointV(n[1], n[2]) for n in nd.nodes if n[0] == "end"
        }
        exceptional = has_ext or bool(boundary_pts & primary_pts)
        degenerate = has_ext and len(nd.nodes) == 1
        hits = tuple(
            sorted(
                v
                for lvl, vs in zh["hits_by_level"].items()
                if Fraction(lvl) <= window_top
                for v in vs
            )
        )
        narrow = (not hits) if exceptional else None
        out.append(ZoneReport(nd.index, exceptional, degenerate, narrow, hits))
    return sorted(out, key=lambda z: z.nucleus)


# ---------------------------------------------------------------------------
# distortion measurement


@dataclass(frozen=True)
class DistortionReport:
    pairs: int
    max_multiplicative: float
    max_additive: float


def point_distance(ball: BallComplex, a, b) -> float:
    """Metric between points of the ball allowing travel along 1-cells and
    along flow midsegments (unit cost per level).  Matches the intrinsic
    metric of flow paths exactly."""
    def key(x):
        return x if isinstance(x, str) else (x.vcell, x.s)

    target = key(b)
    dist: Dict = {key(a): 0.0}
    heap = [(0.0, str(key(a)), a)]
    best = float("inf")
    while heap:
        d, _, v = heapq.heappop(heap)
        kv = key(v)
        if d > dist.get(kv, float("inf")):
            continue
        if kv == target:
            return d
        if d >= best:
            continue
        moves: List[Tuple[object, float]] = []
        if isinstance(v, str):
            for u, w, _ in ball.neighbors(v):
                moves.append((u, w))
            if isinstance(b, BallPoint):
                cell = ball.vertical[b.vcell]
                if v == cell.src:
                    moves.append((b, float(b.s) * cell.weight))
                if v == cell.dst:
                    moves.append((b, float(1 - b.s) * cell.weight))
        else:
            cell = ball.vertical[v.vcell]
            moves.append((cell.src, float(v.s) * cell.weight))
            moves.append((cell.dst, float(1 - v.s) * cell.weight))
            if isinstance(b, BallPoint) and b.vcell == v.vcell:
                moves.append((b, abs(float(b.s - v.s)) * cell.weight))
            nxt = flow_step_ball(ball, v)
            if nxt is not None:
                moves.append((nxt, 1.0))
            for bp, _ in ball_preimages(ball, v):
                moves.append((bp, 1.0))
        for u, w in moves:
            ku = key(u)
            nd = d + w
            if nd < dist.get(ku, float("inf")) - 1e-15:
                dist[ku] = nd
                heapq.heappush(heap, (nd, str(ku), u))
    raise WallError("points not connected in ball")


def distortion_report(
    approx: Approximation, ball: BallComplex, samples: int, seed: int = 0
) -> DistortionReport:
    """Compare intrinsic approximation distance against the ball metric on
    sampled node pairs; best-fit envelope constants, measurement only."""
    import random

    nodes = sorted(approx.nodes, key=str)
    if samples == 0 or len(nodes) < 2:
        return DistortionReport(0, 1.0, 0.0)
    rng = random.Random(seed)
    max_mult = 1.0
    max_add = 0.0
    done = 0
    for _ in range(samples):
        a, b = rng.sample(nodes, 2)
        try:
            da = approx.distance(a, b)
            pa = a[1] if a[0] == "vx" else BallPoint(a[1], a[2])
            pb = b[1] if b[0] == "vx" else BallPoint(b[1], b[2])
            db = point_distance(ball, pa, pb)
        except WallError:
            continue
        done += 1
        if db > 1e-12:
            max_mult = max(max_mult, da / db)
        max_add = max(max_add, abs(da - db))
    return DistortionReport(done, max_mult, max_add)
