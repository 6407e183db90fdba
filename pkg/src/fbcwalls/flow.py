"""The forward semiflow on a mapping torus: exact points, preimages, tunnels,
leaves, periodic orbits, and the rescaled level-tree distance estimator.

Points on edges are exact rationals; one flow step moves a point on an edge
linearly across the unreduced image path of that edge.  Landing on a vertex is
the singular case and is always reported, never perturbed.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .graph import GraphError, GraphMap
from .strata import Stratum
from .torus import BallComplex


class FlowError(ValueError):
    pass


class SingularOrbit(FlowError):
    """A flow step landed exactly on a vertex."""


class DegenerateContact(FlowError):
    """A path touches a leaf or wall at a non-transverse point."""


@dataclass(frozen=True, order=True)
class PointV:
    """A point of the graph: interior point of a positive edge, or a vertex."""

    edge: Optional[str]
    s: Optional[Fraction]
    vertex: Optional[str] = None

    @staticmethod
    def interior(phi_or_graph, edge: str, s: Fraction) -> "PointV":
        g = getattr(phi_or_graph, "graph", phi_or_graph)
        pos = g.positive(edge)
        s = Fraction(s)
        if pos != edge:
            s = 1 - s
        if not 0 < s < 1:
            raise FlowError(f"position {s} is not interior")
        return PointV(pos, s)

    @staticmethod
    def at_vertex(v: str) -> "PointV":
        return PointV(None, None, v)

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def __str__(self) -> str:
        if self.is_vertex:
            return f"vertex:{self.vertex}"
        return f"{self.edge}:{self.s}"


def flow_step(phi: GraphMap, p: PointV) -> PointV:
    """One step of the semiflow; a vertex landing is returned as a vertex point."""
    if p.is_vertex:
        return PointV.at_vertex(phi.vertex_map[p.vertex])
    img = phi.edge_map[p.edge]
    k = len(img)
    t = k * p.s
    j = int(t)
    if t == j:
        return PointV.at_vertex(phi.graph.edge(img.edges[j]).src)
    letter = img.edges[j]
    local = t - j
    pos = phi.graph.positive(letter)
    return PointV(pos, local if pos == letter else 1 - local)


def flow_power(phi: GraphMap, p: PointV, n: int) -> PointV:
    for _ in range(n):
        p = flow_step(phi, p)
    return p


@dataclass(frozen=True)
class Preimage:
    point: PointV
    host: str  # positive edge whose image crosses the target
    position: int  # index of the crossing letter in the image word
    sign: int  # +1 if the crossing letter is positive, else -1


def preimages(phi: GraphMap, p: PointV) -> List[Preimage]:
    """All points flowing onto p in one step.  Exact; the count equals the
    number of occurrences of p's edge (either orientation) in all edge images."""
    if p.is_vertex:
        raise SingularOrbit("preimages of a vertex point are singular")
    g = phi.graph
    out: List[Preimage] = []
    for f in g.positive_edges:
        img = phi.edge_map[f]
        k = len(img)
        for j, letter in enumerate(img.edges):
            if g.positive(letter) != p.edge:
                continue
            if letter == p.edge:
                out.append(Preimage(PointV(f, Fraction(j + p.s, k)), f, j, +1))
            else:
                out.append(Preimage(PointV(f, Fraction(j + 1 - p.s, k)), f, j, -1))
    return sorted(out, key=lambda r: (r.host, r.point.s))


# ---------------------------------------------------------------------------
# tunnels


@dataclass(frozen=True)
class TunnelNode:
    point: PointV
    depth: int  # 0 is the level just below the root
    parent: Optional[int]  # index into the previous depth's node list
    sign: int  # orientation of the branch into the parent


@dataclass
class Tunnel:
    """Iterated preimage tree of a mid-level root point, depth L.

    `levels[k]` holds the nodes k full levels below the root; `leaves` are the
    mid-level points one half-step further down, which project to the root's
    L-fold preimages.
    """

    root: PointV
    depth: int
    levels: List[List[TunnelNode]]
    leaves: List[TunnelNode]

    def leaf_points(self) -> List[PointV]:
        return [n.point for n in self.leaves]

    def node_count(self) -> int:
        return sum(len(lv) for lv in self.levels)


def tunnel(phi: GraphMap, root: PointV, depth: int) -> Tunnel:
    """Build the preimage tree.  Children are ordered by (edge, position)."""
    if depth < 0:
        raise FlowError("tunnel depth must be >= 0")
    if root.is_vertex:
        raise SingularOrbit("tunnel root must be a regular interior point")
    levels: List[List[TunnelNode]] = [[TunnelNode(root, 0, None, +1)]]
    for k in range(1, depth):
        nxt: List[TunnelNode] = []
        for idx, node in enumerate(levels[-1]):
            for pre in preimages(phi, node.point):
                nxt.append(TunnelNode(pre.point, k, idx, pre.sign))
        levels.append(nxt)
    leaves: List[TunnelNode] = []
    if depth >= 1:
        for idx, node in enumerate(levels[-1]):
            for pre in preimages(phi, node.point):
                leaves.append(TunnelNode(pre.point, depth, idx, pre.sign))
    return Tunnel(root, depth, levels, leaves)


def iterated_preimages(phi: GraphMap, p: PointV, n: int) -> List[PointV]:
    pts = [p]
    for _ in range(n):
        pts = [pre.point for q in pts for pre in preimages(phi, q)]
    return sorted(pts)


# ---------------------------------------------------------------------------
# periodic points


@dataclass(frozen=True)
class PeriodicPoint:
    point: PointV
    period: int  # exact (minimal) period


@dataclass(frozen=True)
class PeriodicEdge:
    """Degenerate case: the whole edge is fixed pointwise by the m-fold map."""

    edge: str
    period: int


def periodic_points(
    phi: GraphMap, edge: str, m: int
) -> Tuple[List[PeriodicPoint], List[PeriodicEdge]]:
    """Interior rational points of `edge` returning to themselves in exactly m
    steps, found by composing the per-step affine branch maps and solving the
    fixed-point equation exactly.  Orbits through vertices are excluded.
    """
    if m < 1:
        raise FlowError("period must be >= 1")
    g = phi.graph
    e0 = g.positive(edge)
    points: Set[PointV] = set()
    degenerate: List[PeriodicEdge] = []

    # states: (edge, A, B) with s_now = A*s0 + B, after `depth` steps
    stack: List[Tuple[str, Fraction, Fraction, int]] = [(e0, Fraction(1), Fraction(0), 0)]
    while stack:
        cur, A, B, depth = stack.pop()
        if depth == m:
            if cur != e0:
                continue
            if A == 1:
                if B == 0:
                    degenerate.append(PeriodicEdge(e0, m))
                continue
            s0 = B / (1 - A)
            if not 0 < s0 < 1:
                continue
            cand = PointV(e0, s0)
            orbit_ok = True
            q = cand
            for _ in range(m):
                q = flow_step(phi, q)
                if q.is_vertex:
                    orbit_ok = False
                    break
            if orbit_ok and q == cand:
                points.add(cand)
            continue
        img = phi.edge_map[cur]
        k = len(img)
        for j, letter in enumerate(img.edges):
            pos = g.positive(letter)
            if letter == pos:
                nA, nB = k * A, k * B - j
            else:
                nA, nB = -k * A, (j + 1) - k * B
            stack.append((pos, nA, nB, depth + 1))

    out = []
    for p in sorted(points):
        period = 1
        q = flow_step(phi, p)
        while q != p:
            q = flow_step(phi, q)
            period += 1
        out.append(PeriodicPoint(p, period))
    return out, degenerate


# ---------------------------------------------------------------------------
# ball-anchored points and leaf portions


@dataclass(frozen=True, order=True)
class BallPoint:
    """Interior point of a vertical cell of a ball, along the positive edge."""

    vcell: Tuple[str, str]
    s: Fraction

    def project(self, ball: BallComplex) -> PointV:
        return PointV(self.vcell[1], self.s)

    def height(self, ball: BallComplex) -> int:
        return ball.vertices[self.vcell[0]].height


def ball_point(ball: BallComplex, vcell: Tuple[str, str], s: Fraction) -> BallPoint:
    if vcell not in ball.vertical:
        raise FlowError(f"vertical cell {vcell} not in ball")
    s = Fraction(s)
    if not 0 < s < 1:
        raise FlowError("ball points must be interior")
    return BallPoint(vcell, s)


def flow_step_ball(
    ball: BallComplex, p: BallPoint
) -> Union[BallPoint, str, None]:
    """Flow one level up inside the ball.

    Returns the new point, a vertex label for a singular landing, or None when
    the square above is missing (truncated by the ball boundary).
    """
    sq = ball.square_above(p.vcell)
    if sq is None:
        return None
    k = len(sq.top)
    t = k * p.s
    j = int(t)
    if t == j:
        return sq.top_vertices[j]
    vid, orient = sq.top[j]
    local = t - j
    return BallPoint(vid, local if orient > 0 else 1 - local)


def ball_preimages(ball: BallComplex, p: BallPoint) -> List[Tuple[BallPoint, int]]:
    """Points one level down flowing onto p, with branch orientation signs."""
    out = []
    for sqid, pos, orient in ball.squares_with_top_crossing(p.vcell):
        sq = ball.squares[sqid]
        k = len(sq.top)
        t = pos + (p.s if orient > 0 else 1 - p.s)
        out.append((BallPoint(sq.bottom, Fraction(t, k)), orient))
    return sorted(out, key=lambda r: r[0])


@dataclass
class LeafTrace:
    """A finite portion of the leaf through a point, clipped to a ball.

    Every node has exactly one outgoing midsegment (its forward step) and the
    structure is acyclic.
    """

    base: BallPoint
    forward: List[Union[BallPoint, str]] = field(default_factory=list)
    backward: List[List[Tuple[BallPoint, int]]] = field(default_factory=list)
    truncated: bool = False
    singular: bool = False

    def points(self) -> List[BallPoint]:
        pts = [self.base]
        pts.extend(q for q in self.forward if isinstance(q, BallPoint))
        for level in self.backward:
            pts.extend(q for q, _ in level)
        return pts


def leaf_trace(ball: BallComplex, p: BallPoint, fwd: int, back: int) -> LeafTrace:
    """Forward orbit to depth `fwd` and backward preimage tree to depth `back`."""
    if fwd < 0 or back < 0:
        raise FlowError("depths must be >= 0")
    trace = LeafTrace(p)
    cur: Union[BallPoint, str, None] = p
    for _ in range(fwd):
        assert isinstance(cur, BallPoint)
        nxt = flow_step_ball(ball, cur)
        if nxt is None:
            trace.truncated = True
            break
        trace.forward.append(nxt)
        if isinstance(nxt, str):
            trace.singular = True
            break
        cur = nxt
    frontier = [(p, +1)]
    phi = ball.phi
    for _ in range(back):
        nxt_level: List[Tuple[BallPoint, int]] = []
        for q, _ in frontier:
            pres = ball_preimages(ball, q)
            expected = len(preimages(phi, q.project(ball)))
            if len(pres) < expected:
                trace.truncated = True
            nxt_level.extend(pres)
        if not nxt_level:
            break
        trace.backward.append(nxt_level)
        frontier = nxt_level
    return trace


BallPath = Tuple[str, Tuple[Tuple[str, object, int], ...]]  # (start label, moves)


def leaf_intersections(
    sigma_points: Sequence[Union[BallPoint, str]],
    gamma: BallPath,
    ball: BallComplex,
) -> Tuple[List[BallPoint], int]:
    """Exact intersections of a leaf portion with a combinatorial ball path.

    The leaf meets the 1-skeleton only at its node points on vertical cells,
    so a crossing is such a node on a cell the path traverses.  A path through
    a singular (vertex) node is a degenerate contact and errors out.
    """
    start, moves = gamma
    visited_vcells: List[Tuple[str, str]] = []
    visited_vertices = {start}
    cur = start
    for kind, cid, sign in moves:
        if kind == "v":
            cell = ball.vertical[cid]
            visited_vcells.append(cid)
            cur = cell.dst if sign > 0 else cell.src
        else:
            cell = ball.horizontal[cid]
            cur = cell.upper if sign > 0 else cell.lower
        visited_vertices.add(cur)
    vertex_nodes = {q for q in sigma_points if isinstance(q, str)}
    if vertex_nodes & visited_vertices:
        raise DegenerateContact(
            f"path meets leaf at vertex {sorted(vertex_nodes & visited_vertices)[0]!r}"
        )
    hits: List[BallPoint] = []
    by_cell: Dict[Tuple[str, str], List[BallPoint]] = {}
    for q in sigma_points:
        if isinstance(q, BallPoint):
            by_cell.setdefault(q.vcell, []).append(q)
    for cid in visited_vcells:
        hits.extend(sorted(set(by_cell.get(cid, []))))
    return hits, len(hits) % 2


# ---------------------------------------------------------------------------
# level-tree distance estimator


def level_distance(
    ball: BallComplex,
    stratum: Stratum,
    a: Union[BallPoint, str],
    b: Union[BallPoint, str],
) -> float:
    """Distance inside one level tree, where stratum edges have their weight
    and all other edges count zero."""
    height = a.height(ball) if isinstance(a, BallPoint) else ball.vertices[a].height
    height_b = b.height(ball) if isinstance(b, BallPoint) else ball.vertices[b].height
    if height != height_b:
        raise FlowError("level distance needs points at a common height")

    def w(edge: str) -> float:
        return stratum.omega[edge] if edge in stratum.omega else 0.0

    def seeds(p: Union[BallPoint, str]) -> List[Tuple[str, float]]:
        if isinstance(p, str):
            return [(p, 0.0)]
        cell = ball.vertical[p.vcell]
        we = w(cell.edge)
        return [(cell.src, float(p.s) * we), (cell.dst, float(1 - p.s) * we)]

    dist: Dict[str, float] = {}
    heap: List[Tuple[float, str]] = []
    for label, d0 in seeds(a):
        if d0 < dist.get(label, float("inf")):
            dist[label] = d0
            heapq.heappush(heap, (d0, label))
    targets = dict(seeds(b))
    # same-cell shortcut
    if isinstance(a, BallPoint) and isinstance(b, BallPoint) and a.vcell == b.vcell:
        return float(abs(a.s - b.s)) * w(ball.vertical[a.vcell].edge)
    best = float("inf")
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, float("inf")):
            continue
        if v in targets:
            best = min(best, d + targets[v])
        for u, _, move in ball.neighbors(v):
            if move[0] != "v":
                continue
            cell = ball.vertical[move[1]]
            nd = d + w(cell.edge)
            if nd < dist.get(u, float("inf")) - 1e-15:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    if best == float("inf"):
        raise FlowError("points are not connected inside this ball level")
    return best


def rtree_distance_estimate(
    ball: BallComplex,
    stratum: Stratum,
    p: BallPoint,
    q: BallPoint,
    n: int,
) -> Tuple[List[float], float]:
    """The rescaled sequence lam^-k * (weighted stratum length between the
    k-fold flows of p and q), k = 0..n, and its last value as the estimate.

    The sequence is nonincreasing once defined; flowing out of the ball raises.
    """
    if stratum.kind != "exponential":
        raise FlowError("estimator applies to exponential strata")
    lam = stratum.lam or 1.0
    seq: List[float] = []
    a: Union[BallPoint, str] = p
    b: Union[BallPoint, str] = q
    for k in range(n + 1):
        seq.append(level_distance(ball, stratum, a, b) / lam**k)
        if k == n:
            break
        na = flow_step_ball(ball, a) if isinstance(a, BallPoint) else ball.up_label(a)
        nb = flow_step_ball(ball, b) if isinstance(b, BallPoint) else ball.up_label(b)
        if na is None or nb is None:
            raise FlowError(f"ball too small to flow {n} levels (stopped at {k})")
        a, b = na, nb
    return seq, seq[-1]
