"""Mapping-torus 2-complexes, free-by-cyclic normal forms, and finite balls.

The suspension complex of a graph self-map has the graph's vertices as
0-cells, its edges as vertical 1-cells, one oriented horizontal 1-cell per
vertex, and one 2-cell per edge whose top side spells the edge's image.

Finite portions of the universal cover are labeled level by level: a vertex is
(height m, reduced path w) where w starts at the m-fold image of the base
vertex; moving up one level applies the map to w.  With this scheme upward
exploration never needs the inverse automorphism.  Group elements are written
u*t^n with t f t^-1 = Phi(f); note the stable letter of that presentation is
the inverse of the upward deck letter, so element labels and ball levels carry
opposite signs (see README).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .graph import EdgePath, Graph, GraphError, GraphMap, inverse_name, tighten


class TorusError(ValueError):
    pass


class BallResourceError(RuntimeError):
    """Raised when ball construction hits the vertex cap; carries the partial ball."""

    def __init__(self, message: str, partial: "BallComplex"):
        super().__init__(message)
        self.partial = partial


def h_letter(vertex: str, sign: int) -> str:
    return f"t[{vertex}]" if sign > 0 else f"T[{vertex}]"


@dataclass(frozen=True)
class MappingTorusComplex:
    """Cell structure of the suspension of phi^L."""

    graph: Graph
    power: int
    vertices: Tuple[str, ...]
    vertical: Tuple[str, ...]
    horizontal: Dict[str, str]  # vertex -> horizontal cell letter
    boundaries: Dict[str, Tuple[str, ...]]  # vertical edge -> attaching word
    vertex_image: Dict[str, str]  # where the horizontal cell at v ends

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - (len(self.vertical) + len(self.horizontal)) + len(
            self.boundaries
        )

    def boundary_is_closed(self, e: str) -> bool:
        """The attaching word traverses endpoint-compatible cells and closes up."""
        g = self.graph
        word = self.boundaries[e]

        def ends(letter: str) -> Tuple[str, str]:
            if letter.startswith("t["):
                v = letter[2:-1]
                return v, self.vertex_image[v]
            if letter.startswith("T["):
                v = letter[2:-1]
                return self.vertex_image[v], v
            rec = g.edge(letter)
            return rec.src, rec.dst

        first = ends(word[0])[0]
        cur = first
        for letter in word:
            a, b = ends(letter)
            if a != cur:
                return False
            cur = b
        return cur == first


def build_torus_power(phi: GraphMap, power: int) -> MappingTorusComplex:
    """Mapping torus of the `power`-fold iterate; attaching words stay unreduced."""
    if power < 1:
        raise TorusError("power must be >= 1")
    g = phi.graph
    horizontal = {v: h_letter(v, +1) for v in g.vertices}
    boundaries: Dict[str, Tuple[str, ...]] = {}
    for e in g.positive_edges:
        rec = g.edge(e)
        img = phi.edge_map[e]
        for _ in range(power - 1):
            img = phi.apply(img)  # unreduced substitution, as the cells require
        word = (
            h_letter(rec.src, -1),
            e,
            h_letter(rec.dst, +1),
        ) + tuple(inverse_name(x) for x in reversed(img.edges))
        boundaries[e] = word
    return MappingTorusComplex(
        graph=g,
        power=power,
        vertices=g.vertices,
        vertical=g.positive_edges,
        horizontal=horizontal,
        boundaries=boundaries,
        vertex_image={v: phi.vertex_power(v, power) for v in g.vertices},
    )


def build_torus(phi: GraphMap) -> MappingTorusComplex:
    return build_torus_power(phi, 1)


# ---------------------------------------------------------------------------
# normal forms


@dataclass(frozen=True)
class GroupElement:
    """u * t^n with u a reduced edge path; unique for a fixed marking."""

    u: EdgePath
    n: int

    def __str__(self) -> str:
        word = self.u.word() or "1"
        if self.n == 0:
            return word
        return f"{word}*t^{self.n}" if word != "1" else f"t^{self.n}"


def ge_identity(phi: GraphMap, vertex: Optional[str] = None) -> GroupElement:
    v = vertex if vertex is not None else min(phi.graph.vertices)
    return GroupElement(phi.graph.path([], v), 0)


def ge_mul(phi: GraphMap, a: GroupElement, b: GroupElement) -> GroupElement:
    """(u1, n1)(u2, n2) = (u1 * Phi^n1(u2) reduced, n1 + n2)."""
    shifted = phi.apply_power(b.u, a.n)
    if a.u.dst != shifted.src:
        raise TorusError("elements are not composable at their endpoints")
    return GroupElement(tighten(a.u * shifted), a.n + b.n)


def ge_inverse(phi: GraphMap, a: GroupElement) -> GroupElement:
    return GroupElement(phi.apply_power(a.u.inverse(), -a.n), -a.n)


def normal_form(phi: GraphMap, word: str) -> GroupElement:
    """Rewrite a word in the edge letters and t/T into the form u * t^n.

    Crossing a negative t power over a generator needs the loaded inverse map;
    a missing one raises with an explicit message.
    """
    g = phi.graph
    tokens: List[str] = []
    i = 0
    order = sorted(list(g.oriented_edges) + ["t", "T"], key=len, reverse=True)
    while i < len(word):
        if word[i].isspace():
            i += 1
            continue
        for tok in order:
            if word.startswith(tok, i):
                tokens.append(tok)
                i += len(tok)
                break
        else:
            raise TorusError(f"cannot tokenize {word!r} at position {i}")
    u: Optional[EdgePath] = None
    n = 0
    for tok in tokens:
        if tok == "t":
            n += 1
        elif tok == "T":
            n -= 1
        else:
            try:
                piece = phi.apply_power(g.path([tok]), n)
            except GraphError:
                raise TorusError(
                    "inverse required: negative t-power crossing needs the inverse map"
                ) from None
            u = piece if u is None else tighten(u * piece)
    if u is None:
        u = g.path([], min(g.vertices))
    return GroupElement(tighten(u), n)


# ---------------------------------------------------------------------------
# balls in the universal cover


@dataclass(frozen=True)
class BallVertex:
    label: str
    height: int
    path: EdgePath
    dist: float


@dataclass(frozen=True)
class VerticalCell:
    """A vertical 1-cell; `src` is the endpoint the positive edge leaves."""

    id: Tuple[str, str]  # (src label, positive edge name)
    src: str
    dst: str
    edge: str
    weight: float


@dataclass(frozen=True)
class HorizontalCell:
    id: str  # lower vertex label
    lower: str
    upper: str


@dataclass(frozen=True)
class SquareCell:
    """2-cell over a vertical cell: its top spells the edge's image one level up."""

    id: Tuple[str, str]
    bottom: Tuple[str, str]
    left: str  # horizontal cell at the bottom source
    right: str
    top: Tuple[Tuple[Tuple[str, str], int], ...]  # (vertical cell id, +1/-1) steps
    top_vertices: Tuple[str, ...]


def vertex_label(height: int, path: EdgePath) -> str:
    return f"{path.word()}@{height}"


class BallComplex:
    """A finite, weighted-metric ball in the universal cover's 1-skeleton,
    together with every 2-cell whose entire closed boundary lies inside."""

    def __init__(
        self,
        phi: GraphMap,
        weights: Dict[str, float],
        radius: float,
        base: Tuple[int, EdgePath],
        vertices: Dict[str, BallVertex],
        truncated: bool = False,
    ):
        self.phi = phi
        self.graph = phi.graph
        self.weights = dict(weights)
        self.radius = radius
        self.base_height, self.base_path = base
        self.base_label = vertex_label(self.base_height, self.base_path)
        self.vertices = vertices
        self.truncated = truncated
        self.vertical: Dict[Tuple[str, str], VerticalCell] = {}
        self.horizontal: Dict[str, HorizontalCell] = {}
        self.squares: Dict[Tuple[str, str], SquareCell] = {}
        self._up: Dict[str, str] = {}
        self._adj: Dict[str, List[Tuple[str, float, Tuple]]] = {v: [] for v in vertices}
        self._assemble()

    # -- label helpers --------------------------------------------------------

    def vertex_at(self, height: int, path: EdgePath) -> Optional[BallVertex]:
        return self.vertices.get(vertex_label(height, path))

    def up_label(self, label: str) -> Optional[str]:
        return self._up.get(label)

    def ordered_labels(self) -> List[str]:
        return sorted(self.vertices, key=lambda l: (self.vertices[l].height, l))

    def neighbors(self, label: str) -> List[Tuple[str, float, Tuple]]:
        return self._adj[label]

    # -- assembly ---------------------------------------------------------------

    def _assemble(self) -> None:
        g = self.graph
        for label in self.ordered_labels():
            bv = self.vertices[label]
            w, m = bv.path, bv.height
            for e in sorted(g.edges_at(w.dst)):
                pos = g.positive(e)
                if pos != e:
                    continue  # record each pair once, from its positive source
                other = tighten(w * g.path([e]))
                dst = vertex_label(m, other)
                if dst in self.vertices:
                    cell = VerticalCell((label, e), label, dst, e, self.weights[e])
                    self.vertical[cell.id] = cell
            up = vertex_label(m + 1, tighten(self.phi.apply(w)))
            if up in self.vertices:
                self.horizontal[label] = HorizontalCell(label, label, up)
                self._up[label] = up
        for cell in self.vertical.values():
            self._adj[cell.src].append((cell.dst, cell.weight, ("v", cell.id, +1)))
            self._adj[cell.dst].append((cell.src, cell.weight, ("v", cell.id, -1)))
        for h in self.horizontal.values():
            self._adj[h.lower].append((h.upper, 1.0, ("h", h.id, +1)))
            self._adj[h.upper].append((h.lower, 1.0, ("h", h.id, -1)))
        for key in sorted(self.vertical):
            cell = self.vertical[key]
            sq = self._square_over(cell)
            if sq is not None:
                self.squares[sq.id] = sq
        self._tops_crossing: Dict[Tuple[str, str], List[Tuple[Tuple[str, str], int, int]]] = {}
        for sq in self.squares.values():
            for pos, (vid, orient) in enumerate(sq.top):
                self._tops_crossing.setdefault(vid, []).append((sq.id, pos, orient))

    def _square_over(self, cell: VerticalCell) -> Optional[SquareCell]:
        g = self.graph
        left = self.horizontal.get(cell.src)
        right = self.horizontal.get(cell.dst)
        if left is None or right is None:
            return None
        src_v = self.vertices[cell.src]
        cur = tighten(self.phi.apply(src_v.path))
        cur_label = vertex_label(src_v.height + 1, cur)
        steps: List[Tuple[Tuple[str, str], int]] = []
        tops = [cur_label]
        for letter in self.phi.edge_map[cell.edge].edges:
            nxt = tighten(cur * g.path([letter]))
            nxt_label = vertex_label(src_v.height + 1, nxt)
            if nxt_label not in self.vertices:
                return None
            pos = g.positive(letter)
            if pos == letter:
                vid = (cur_label, pos)
                orient = +1
            else:
                vid = (nxt_label, pos)
                orient = -1
            if vid not in self.vertical:
                return None
            steps.append((vid, orient))
            tops.append(nxt_label)
            cur, cur_label = nxt, nxt_label
        return SquareCell(
            id=cell.id,
            bottom=cell.id,
            left=left.id,
            right=right.id,
            top=tuple(steps),
            top_vertices=tuple(tops),
        )

    # -- flow indices -----------------------------------------------------------

    def square_above(self, vid: Tuple[str, str]) -> Optional[SquareCell]:
        return self.squares.get(vid)

    def squares_with_top_crossing(
        self, vid: Tuple[str, str]
    ) -> List[Tuple[Tuple[str, str], int, int]]:
        """(square id, position in top word, orientation) for every square whose
        top path traverses the given vertical cell."""
        return self._tops_crossing.get(vid, [])

    # -- metric -----------------------------------------------------------------

    def distances_from(self, sources: Iterable[str]) -> Dict[str, float]:
        dist: Dict[str, float] = {}
        heap: List[Tuple[float, str]] = []
        for s in sources:
            if s not in self.vertices:
                raise TorusError(f"vertex {s!r} not in ball")
            dist[s] = 0.0
            heapq.heappush(heap, (0.0, s))
        while heap:
            d, v = heapq.heappop(heap)
            if d > dist.get(v, float("inf")):
                continue
            for u, w, _ in self._adj[v]:
                nd = d + w
                if nd < dist.get(u, float("inf")) - 1e-15:
                    dist[u] = nd
                    heapq.heappush(heap, (nd, u))
        return dist

    def height_of(self, obj) -> Union[int, Fraction]:
        """Heights: integers on vertices and vertical cells, half-integers on
        horizontal cells and on the mid-slice of a 2-cell.

        Cells are addressed by tagged references ("v", id), ("h", id),
        ("sq", id); a bare string is a vertex label."""
        if isinstance(obj, str):
            if obj in self.vertices:
                return self.vertices[obj].height
            raise TorusError(f"unknown vertex {obj!r}")
        kind, cid = obj
        if kind == "v" and cid in self.vertical:
            return self.vertices[self.vertical[cid].src].height
        if kind == "h" and cid in self.horizontal:
            return Fraction(2 * self.vertices[cid].height + 1, 2)
        if kind == "sq" and cid in self.squares:
            n = self.vertices[self.squares[cid].bottom[0]].height
            return Fraction(2 * n + 1, 2)
        raise TorusError(f"unknown cell {obj!r}")


def element_to_level_coords(phi: GraphMap, g: GroupElement) -> Tuple[int, EdgePath]:
    """Convert u*t^n to (height, level path).  The upward deck letter is t^-1,
    so the height is -n and the path picks up Phi^-n."""
    return (-g.n, phi.apply_power(g.u, -g.n))


def build_ball(
    phi: GraphMap,
    weights: Dict[str, float],
    radius: float,
    base: Union[GroupElement, Tuple[int, EdgePath], None] = None,
    vertex_cap: int = 10**6,
    partial_on_cap: bool = False,
) -> BallComplex:
    """Dijkstra exploration of the weighted 1-skeleton out to `radius`.

    Neighbors: vertical steps append an edge at the path's endpoint (weight
    from `weights`), the upward step applies the map (weight 1), and the
    downward step applies the inverse when loaded.  Vertices are deduplicated
    by their (height, path) label, so the result is canonical.
    """
    if radius < 0:
        raise TorusError("radius must be >= 0")
    g = phi.graph
    for e in g.positive_edges:
        if weights.get(e, 0) <= 0:
            raise TorusError(f"missing or nonpositive weight for edge {e!r}")
    if base is None:
        start: Tuple[int, EdgePath] = (0, g.path([], min(g.vertices)))
    elif isinstance(base, GroupElement):
        start = element_to_level_coords(phi, base)
    else:
        start = (base[0], tighten(base[1]))
    dist: Dict[str, float] = {}
    info: Dict[str, Tuple[int, EdgePath]] = {}
    start_label = vertex_label(*start)
    dist[start_label] = 0.0
    info[start_label] = start
    heap: List[Tuple[float, int, str]] = [(0.0, start[0], start_label)]
    eps = 1e-9
    capped = False
    while heap:
        d, m, label = heapq.heappop(heap)
        if d > dist.get(label, float("inf")):
            continue
        w = info[label][1]
        moves: List[Tuple[int, EdgePath, float]] = []
        for e in sorted(g.edges_at(w.dst)):
            moves.append((m, tighten(w * g.path([e])), weights[g.positive(e)]))
        moves.append((m + 1, tighten(phi.apply(w)), 1.0))
        if phi.has_inverse:
            moves.append((m - 1, tighten(phi.apply_inverse(w)), 1.0))
        for nm, nw, cost in moves:
            nd = d + cost
            if nd > radius + eps:
                continue
            nlabel = vertex_label(nm, nw)
            if nd < dist.get(nlabel, float("inf")) - 1e-15:
                if nlabel not in dist and len(dist) >= vertex_cap:
                    capped = True
                    continue
                dist[nlabel] = nd
                info[nlabel] = (nm, nw)
                heapq.heappush(heap, (nd, nm, nlabel))
    vertices = {
        label: BallVertex(label, info[label][0], info[label][1], dist[label])
        for label in dist
    }
    ball = BallComplex(phi, weights, radius, start, vertices, truncated=capped)
    if capped and not partial_on_cap:
        raise BallResourceError(
            f"vertex cap {vertex_cap} reached at radius {radius}", ball
        )
    return ball


def geodesic_in_ball(ball: BallComplex, x: str, y: str) -> Tuple[List[str], float]:
    """Weighted shortest path between ball vertices, inside the ball only.

    This upper-bounds the ambient distance; it equals it exactly when a true
    geodesic stays in the ball.
    """
    if x not in ball.vertices or y not in ball.vertices:
        raise TorusError("geodesic endpoints must be ball vertices")
    dist: Dict[str, float] = {x: 0.0}
    prev: Dict[str, str] = {}
    heap: List[Tuple[float, str]] = [(0.0, x)]
    while heap:
        d, v = heapq.heappop(heap)
        if v == y:
            break
        if d > dist.get(v, float("inf")):
            continue
        for u, wgt, _ in ball.neighbors(v):
            nd = d + wgt
            if nd < dist.get(u, float("inf")) - 1e-15:
                dist[u] = nd
                prev[u] = v
                heapq.heappush(heap, (nd, u))
    if y not in dist:
        raise TorusError("endpoints are disconnected inside the ball")
    path = [y]
    while path[-1] != x:
        path.append(prev[path[-1]])
    path.reverse()
    return path, dist[y]
