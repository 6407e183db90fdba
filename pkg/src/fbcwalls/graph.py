"""Finite graphs with paired oriented edges, reduced edge paths, and graph self-maps.

Edges come in inverse pairs related by name.swapcase(): the edge named "a" has
inverse "A".  A word like "aBa" denotes the path a, b^-1, a.  All values are
immutable after construction; operations are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple


class GraphError(ValueError):
    """Structural problem with a graph, path, or graph map."""


def inverse_name(name: str) -> str:
    return name.swapcase()


@dataclass(frozen=True)
class Edge:
    name: str
    src: str
    dst: str


class Graph:
    """A finite graph whose oriented edge set is closed under inversion."""

    def __init__(self, vertices: Iterable[str], edges: Iterable[Tuple[str, str, str]]):
        self.vertices: Tuple[str, ...] = tuple(dict.fromkeys(str(v) for v in vertices))
        vset = set(self.vertices)
        if not vset:
            raise GraphError("graph needs at least one vertex")
        self._edges: Dict[str, Edge] = {}
        positive: List[str] = []
        for name, src, dst in edges:
            name = str(name)
            if name.swapcase() == name:
                raise GraphError(f"edge name {name!r} has no distinct inverse form")
            if name.lower() in ("t",):
                raise GraphError("edge names 't'/'T' are reserved for the stable letter")
            if name in self._edges or inverse_name(name) in self._edges:
                raise GraphError(f"duplicate edge name {name!r}")
            if src not in vset or dst not in vset:
                raise GraphError(f"edge {name!r} has endpoint outside the vertex set")
            self._edges[name] = Edge(name, src, dst)
            self._edges[inverse_name(name)] = Edge(inverse_name(name), dst, src)
            positive.append(name)
        self.positive_edges: Tuple[str, ...] = tuple(sorted(positive))
        self._token_order = sorted(self._edges, key=len, reverse=True)

    # -- lookups ------------------------------------------------------------

    def edge(self, name: str) -> Edge:
        try:
            return self._edges[name]
        except KeyError:
            raise GraphError(f"unknown edge {name!r}") from None

    def has_edge(self, name: str) -> bool:
        return name in self._edges

    @property
    def oriented_edges(self) -> Tuple[str, ...]:
        return tuple(sorted(self._edges))

    def positive(self, name: str) -> str:
        """Canonical representative of an edge pair: the user-declared orientation."""
        if name in self._edges:
            pos = name if name in set(self.positive_edges) else inverse_name(name)
            return pos
        raise GraphError(f"unknown edge {name!r}")

    def edges_at(self, vertex: str) -> Tuple[str, ...]:
        return tuple(e for e in self.oriented_edges if self._edges[e].src == vertex)

    def is_rose(self) -> bool:
        return len(self.vertices) == 1

    # -- paths --------------------------------------------------------------

    def path(self, edges: Sequence[str], base: Optional[str] = None) -> "EdgePath":
        return EdgePath(self, tuple(edges), base)

    def parse_word(self, word: str, base: Optional[str] = None) -> "EdgePath":
        """Parse a word like "aBa" into a path, greedy longest-match on edge names."""
        names: List[str] = []
        i = 0
        while i < len(word):
            if word[i].isspace():
                i += 1
                continue
            for tok in self._token_order:
                if word.startswith(tok, i):
                    names.append(tok)
                    i += len(tok)
                    break
            else:
                raise GraphError(f"cannot tokenize {word!r} at position {i}")
        return self.path(names, base)


class EdgePath:
    """A combinatorial edge path; empty paths carry a base vertex."""

    __slots__ = ("graph", "edges", "_base")

    def __init__(self, graph: Graph, edges: Tuple[str, ...], base: Optional[str] = None):
        self.graph = graph
        self.edges = tuple(edges)
        if self.edges:
            prev = None
            for name in self.edges:
                rec = graph.edge(name)
                if prev is not None and prev != rec.src:
                    raise GraphError(f"path breaks at {name!r}: {prev} != {rec.src}")
                prev = rec.dst
            self._base = graph.edge(self.edges[0]).src
            if base is not None and base != self._base:
                raise GraphError("base vertex disagrees with first edge")
        else:
            if base is None:
                raise GraphError("empty path needs a base vertex")
            if base not in set(graph.vertices):
                raise GraphError(f"unknown vertex {base!r}")
            self._base = base

    @property
    def src(self) -> str:
        return self._base

    @property
    def dst(self) -> str:
        return self.graph.edge(self.edges[-1]).dst if self.edges else self._base

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def __getitem__(self, i):
        return self.edges[i]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EdgePath)
            and self.edges == other.edges
            and self.src == other.src
        )

    def __hash__(self) -> int:
        return hash((self.edges, self._base))

    def __repr__(self) -> str:
        return f"EdgePath({self.word()!r} @ {self.src})" if not self.edges else f"EdgePath({self.word()!r})"

    def word(self) -> str:
        return "".join(self.edges)

    def is_reduced(self) -> bool:
        return all(
            self.edges[i + 1] != inverse_name(self.edges[i])
            for i in range(len(self.edges) - 1)
        )

    def inverse(self) -> "EdgePath":
        return EdgePath(
            self.graph,
            tuple(inverse_name(e) for e in reversed(self.edges)),
            self.dst,
        )

    def __mul__(self, other: "EdgePath") -> "EdgePath":
        if self.dst != other.src:
            raise GraphError("cannot concatenate: endpoint mismatch")
        return EdgePath(self.graph, self.edges + other.edges, self._base)


def tighten(p: EdgePath) -> EdgePath:
    """Free reduction: the unique reduced path freely equal to p, same endpoints."""
    stack: List[str] = []
    for e in p.edges:
        if stack and stack[-1] == inverse_name(e):
            stack.pop()
        else:
            stack.append(e)
    return EdgePath(p.graph, tuple(stack), p.src)


class GraphMap:
    """A self-map of a graph: vertices to vertices, edges to nontrivial paths.

    `edge_map` assigns a path to each positive edge; inverse edges map to the
    inverse paths.  An optional `inverse_map` gives a substitution undoing the
    induced free-group automorphism; it is verified on generators at load.
    """

    def __init__(
        self,
        graph: Graph,
        vertex_map: Dict[str, str],
        edge_map: Dict[str, EdgePath],
        inverse_map: Optional[Dict[str, EdgePath]] = None,
    ):
        self.graph = graph
        vset = set(graph.vertices)
        if set(vertex_map) != vset or not set(vertex_map.values()) <= vset:
            raise GraphError("vertex map must send every vertex to a vertex")
        self.vertex_map = dict(vertex_map)
        self.edge_map: Dict[str, EdgePath] = {}
        for e in graph.positive_edges:
            if e not in edge_map:
                raise GraphError(f"no image for edge {e!r}")
            img = edge_map[e]
            if len(img) == 0:
                raise GraphError(f"image of {e!r} is a trivial path")
            rec = graph.edge(e)
            if img.src != vertex_map[rec.src] or img.dst != vertex_map[rec.dst]:
                raise GraphError(f"image of {e!r} has wrong endpoints")
            self.edge_map[e] = img
        self.inverse_map: Optional[Dict[str, EdgePath]] = None
        if inverse_map is not None:
            self.inverse_map = {
                e: inverse_map[e] for e in graph.positive_edges
            }
            self._inverse_vertex_map = self._check_inverse()

    def _check_inverse(self) -> Dict[str, str]:
        assert self.inverse_map is not None
        ivmap: Dict[str, str] = {}
        for e in self.graph.positive_edges:
            pre = self.inverse_map[e]
            back = tighten(self.apply(pre))
            if back.edges != (e,):
                raise GraphError(
                    f"inverse map fails on {e!r}: phi(inverse({e!r})) reduces to "
                    f"{back.word()!r}"
                )
            rec = self.graph.edge(e)
            for v, w in ((rec.src, pre.src), (rec.dst, pre.dst)):
                if ivmap.setdefault(v, w) != w:
                    raise GraphError(f"inverse map is inconsistent at vertex {v!r}")
        for v in self.graph.vertices:
            ivmap.setdefault(v, v)
        return ivmap

    @property
    def has_inverse(self) -> bool:
        return self.inverse_map is not None

    # -- application ---------------------------------------------------------

    def image_of_edge(self, name: str) -> EdgePath:
        pos = self.graph.positive(name)
        img = self.edge_map[pos]
        return img if pos == name else img.inverse()

    def apply(self, p: EdgePath) -> EdgePath:
        """Substitute edge images; the result is NOT reduced."""
        out: List[str] = []
        for e in p.edges:
            out.extend(self.image_of_edge(e).edges)
        return EdgePath(self.graph, tuple(out), self.vertex_map[p.src])

    def apply_inverse(self, p: EdgePath) -> EdgePath:
        if self.inverse_map is None:
            raise GraphError("inverse map required but not loaded")
        out: List[str] = []
        for e in p.edges:
            pos = self.graph.positive(e)
            img = self.inverse_map[pos]
            out.extend(img.edges if pos == e else img.inverse().edges)
        return EdgePath(self.graph, tuple(out), self._inverse_vertex_map[p.src])

    def apply_power(self, p: EdgePath, n: int) -> EdgePath:
        """tighten(phi^n(p)), reducing after each substitution; n may be negative."""
        q = tighten(p)
        step = self.apply if n >= 0 else self.apply_inverse
        for _ in range(abs(n)):
            q = tighten(step(q))
        return q

    def vertex_power(self, v: str, n: int) -> str:
        for _ in range(n):
            v = self.vertex_map[v]
        return v


def apply_map(phi: GraphMap, p: EdgePath) -> EdgePath:
    return phi.apply(p)


def iterate_tight(phi: GraphMap, p: EdgePath, n: int) -> EdgePath:
    if n < 0:
        raise GraphError("iterate_tight needs n >= 0")
    return phi.apply_power(p, n)


def direction_map(phi: GraphMap) -> Dict[str, str]:
    """The induced map on directions: d maps to the first edge of phi(d)."""
    return {d: phi.image_of_edge(d).edges[0] for d in phi.graph.oriented_edges}


def turn_collision(phi: GraphMap, d1: str, d2: str) -> Optional[str]:
    """First common value of the direction orbits of d1, d2, or None if none.

    Exact: the pair orbit lives in a finite set, so it either collides or
    enters a cycle within |directions|^2 steps.
    """
    D = direction_map(phi)
    seen = set()
    a, b = d1, d2
    while True:
        if a == b:
            return a
        key = (a, b) if a <= b else (b, a)
        if key in seen:
            return None
        seen.add(key)
        a, b = D[a], D[b]


def illegal_turns(phi: GraphMap) -> FrozenSet[FrozenSet[str]]:
    """All turns (unordered pairs of distinct directions at a common vertex)
    that are eventually folded by the direction map."""
    g = phi.graph
    out = set()
    dirs = g.oriented_edges
    for i, d1 in enumerate(dirs):
        for d2 in dirs[i + 1 :]:
            if g.edge(d1).src != g.edge(d2).src:
                continue
            if turn_collision(phi, d1, d2) is not None:
                out.add(frozenset((d1, d2)))
    return frozenset(out)


def turns_of_path(p: EdgePath) -> List[Tuple[str, str]]:
    """Turns taken by p: at each interior vertex, the pair (prev^-1, next)."""
    return [
        (inverse_name(p.edges[i]), p.edges[i + 1]) for i in range(len(p.edges) - 1)
    ]


def path_legal(phi, p: EdgePath, filtration=None, level: Optional[int] = None) -> bool:
    """Whether p is legal; with (filtration, level), whether p is level-legal.

    A turn is allowed if its direction orbits never collide; with a filtration,
    a collision is also allowed when the colliding edge lies in the level below.
    """
    if not p.is_reduced():
        raise GraphError("path_legal expects a reduced path")
    if (filtration is None) != (level is None):
        raise GraphError("filtration and level go together")
    lower = None
    if filtration is not None:
        if not 1 <= level <= len(filtration.levels):
            raise GraphError(f"level {level} out of range")
        lower = filtration.level_edges(level - 1)
    for d1, d2 in turns_of_path(p):
        c = turn_collision(phi, d1, d2)
        if c is None:
            continue
        if lower is not None and phi.graph.positive(c) in lower:
            continue
        return False
    return True
