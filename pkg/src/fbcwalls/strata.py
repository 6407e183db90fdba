"""Filtrations, transition matrices, growth classification, and axiom checks.

A filtration is an increasing chain of invariant subgraphs; each stratum
(difference of consecutive levels) carries an integer transition matrix whose
Perron-Frobenius data classifies it as zero, polynomial, or exponential and
supplies the edge weights used by the metric downstream.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .graph import EdgePath, Graph, GraphError, GraphMap, inverse_name, tighten, turn_collision

POWER_TOL = 1e-12
POWER_CAP = 10_000
POLY_TOL = 1e-9


class StrataError(ValueError):
    pass


class Filtration:
    """Strictly increasing chain of subgraphs given by positive-edge sets.

    Level 0 is empty; the top level is the whole graph.  Each level must be
    invariant under the map it is used with (checked by `verify_invariance`).
    """

    def __init__(self, graph: Graph, levels: Sequence[Sequence[str]]):
        self.graph = graph
        lvls: List[FrozenSet[str]] = []
        for raw in levels:
            cur = frozenset(graph.positive(e) for e in raw)
            if lvls and not lvls[-1] < cur:
                raise StrataError("filtration levels must strictly increase")
            if not lvls and not cur:
                raise StrataError("filtration levels must be nonempty")
            lvls.append(cur)
        if not lvls or lvls[-1] != frozenset(graph.positive_edges):
            raise StrataError("top filtration level must contain every edge")
        self.levels: Tuple[FrozenSet[str], ...] = tuple(lvls)

    def __len__(self) -> int:
        return len(self.levels)

    def level_edges(self, i: int) -> FrozenSet[str]:
        """Edges of level i, with level 0 empty."""
        if i == 0:
            return frozenset()
        return self.levels[i - 1]

    def stratum_edges(self, i: int) -> Tuple[str, ...]:
        return tuple(sorted(self.level_edges(i) - self.level_edges(i - 1)))

    def level_of_edge(self, name: str) -> int:
        pos = self.graph.positive(name)
        for i in range(1, len(self.levels) + 1):
            if pos in self.level_edges(i):
                return i
        raise StrataError(f"edge {name!r} not in filtration")

    def verify_invariance(self, phi: GraphMap) -> Optional[Tuple[str, str]]:
        """None if every level is invariant, else a witness (edge, stray image edge)."""
        for i in range(1, len(self.levels) + 1):
            lvl = self.level_edges(i)
            for e in sorted(lvl):
                for f in phi.edge_map[e].edges:
                    if self.graph.positive(f) not in lvl:
                        return (e, f)
        return None


def _letter_counts(phi: GraphMap, e: str) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for f in phi.edge_map[e].edges:
        pos = phi.graph.positive(f)
        counts[pos] = counts.get(pos, 0) + 1
    return counts


def transition_matrix(phi: GraphMap, filtration: Filtration, i: int) -> List[List[int]]:
    """Row e, column f: how often phi(e) traverses f or its inverse, within stratum i.

    Rows and columns are ordered lexicographically by edge name.
    """
    edges = filtration.stratum_edges(i)
    if not edges:
        raise StrataError(f"stratum {i} is empty")
    return [[_letter_counts(phi, e).get(f, 0) for f in edges] for e in edges]


def compute_maximal_filtration(phi: GraphMap) -> Filtration:
    """Condense the edge-transition digraph into strongly connected components.

    Nodes are edge pairs; there is an arc e -> f when phi(e) traverses f.  The
    strata are the components in dependency order (lowest first), which makes
    every level invariant and every stratum matrix zero or irreducible.
    """
    g = phi.graph
    nodes = list(g.positive_edges)
    succ = {e: sorted(set(_letter_counts(phi, e))) for e in nodes}
    comp = _tarjan_scc(nodes, succ)
    comp_of = {e: ci for ci, c in enumerate(comp) for e in c}
    # Arc e -> f means e depends on f, so f's component must come first.
    indeg = [0] * len(comp)
    rev: List[set] = [set() for _ in comp]
    for e in nodes:
        for f in succ[e]:
            a, b = comp_of[e], comp_of[f]
            if a != b and a not in rev[b]:
                rev[b].add(a)
                indeg[a] += 1
    heap = [(min(comp[ci]), ci) for ci in range(len(comp)) if indeg[ci] == 0]
    heapq.heapify(heap)
    order: List[int] = []
    while heap:
        _, ci = heapq.heappop(heap)
        order.append(ci)
        for a in sorted(rev[ci]):
            indeg[a] -= 1
            if indeg[a] == 0:
                heapq.heappush(heap, (min(comp[a]), a))
    if len(order) != len(comp):
        raise StrataError("cyclic condensation; this cannot happen")
    levels: List[List[str]] = []
    acc: List[str] = []
    for ci in order:
        acc = acc + sorted(comp[ci])
        levels.append(list(acc))
    filt = Filtration(g, levels)
    if filt.verify_invariance(phi) is not None:
        raise StrataError("condensation produced a non-invariant filtration")
    return filt


def _tarjan_scc(nodes: List[str], succ: Dict[str, List[str]]) -> List[List[str]]:
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    on_stack: Dict[str, bool] = {}
    stack: List[str] = []
    out: List[List[str]] = []
    counter = itertools.count()

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                elif on_stack.get(w):
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    scc.append(w)
                    if w == v:
                        break
                out.append(sorted(scc))
    return out


def _is_irreducible(matrix: Sequence[Sequence[int]]) -> bool:
    n = len(matrix)
    reach = [[bool(matrix[i][j]) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    return all(reach[i][j] for i in range(n) for j in range(n))


def _is_zero(matrix: Sequence[Sequence[int]]) -> bool:
    return all(x == 0 for row in matrix for x in row)


@dataclass(frozen=True)
class StratumClass:
    kind: str  # "zero" | "polynomial" | "exponential"
    lam: Optional[float]
    omega: Tuple[float, ...]


def classify_stratum(matrix: Sequence[Sequence[int]]) -> StratumClass:
    """Growth class, spectral radius, and min-normalized right eigenvector.

    Power iteration runs on M + I so periodic irreducible matrices converge;
    that shift moves the spectral radius by exactly 1 and keeps the eigenvector.
    """
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise StrataError("transition matrix must be square")
    if any(x < 0 for row in matrix for x in row):
        raise StrataError("transition matrix must be nonnegative")
    if _is_zero(matrix):
        return StratumClass("zero", None, tuple(1.0 for _ in range(n)))
    if not _is_irreducible(matrix):
        raise StrataError(
            "filtration not maximal: nonzero reducible transition matrix; "
            "use compute_maximal_filtration"
        )
    a = np.asarray(matrix, dtype=float) + np.eye(n)
    v = np.ones(n)
    lam_shifted = 1.0
    for _ in range(POWER_CAP):
        w = a @ v
        lam_shifted = float(np.max(w))
        residual = float(np.max(np.abs(w - lam_shifted * v)))
        v = w / lam_shifted
        if residual <= POWER_TOL * max(1.0, lam_shifted):
            break
    lam = lam_shifted - 1.0
    omega = v / np.min(v)
    kind = "polynomial" if abs(lam - 1.0) <= POLY_TOL else "exponential"
    if kind == "polynomial":
        lam = 1.0
    return StratumClass(kind, lam, tuple(float(x) for x in omega))


@dataclass(frozen=True)
class Stratum:
    index: int
    edges: Tuple[str, ...]
    matrix: Tuple[Tuple[int, ...], ...]
    kind: str
    lam: Optional[float]
    omega: Dict[str, float]


def analyze_strata(phi: GraphMap, filtration: Filtration) -> List[Stratum]:
    out = []
    for i in range(1, len(filtration) + 1):
        edges = filtration.stratum_edges(i)
        m = transition_matrix(phi, filtration, i)
        cls = classify_stratum(m)
        out.append(
            Stratum(
                index=i,
                edges=edges,
                matrix=tuple(tuple(row) for row in m),
                kind=cls.kind,
                lam=cls.lam,
                omega=dict(zip(edges, cls.omega)),
            )
        )
    return out


def edge_weights(strata: Sequence[Stratum]) -> Dict[str, float]:
    """Weight of every positive edge: its eigenvector entry, 1 on zero strata."""
    weights: Dict[str, float] = {}
    for s in strata:
        weights.update(s.omega)
    return weights


def stratum_of_edge(strata: Sequence[Stratum], name: str) -> Stratum:
    for s in strata:
        if name in s.edges:
            return s
    raise StrataError(f"edge {name!r} not covered by strata")


# ---------------------------------------------------------------------------
# verification reports


@dataclass(frozen=True)
class CheckResult:
    axiom: str
    status: str  # "verified" | "violated" | "unknown-up-to-bound"
    detail: str = ""
    witness: Optional[str] = None
    bound: Optional[int] = None


@dataclass
class VerificationReport:
    kind: str
    items: List[CheckResult] = field(default_factory=list)

    def add(self, *args, **kwargs) -> None:
        self.items.append(CheckResult(*args, **kwargs))

    @property
    def ok(self) -> bool:
        return all(it.status != "violated" for it in self.items)

    def status_of(self, axiom: str) -> str:
        for it in self.items:
            if it.axiom == axiom:
                return it.status
        raise KeyError(axiom)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ok": self.ok,
            "items": [
                {
                    "axiom": it.axiom,
                    "status": it.status,
                    "detail": it.detail,
                    "witness": it.witness,
                    "bound": it.bound,
                }
                for it in self.items
            ],
        }


def _immersed_paths_between(
    graph: Graph, allowed: FrozenSet[str], endpoints: FrozenSet[str], max_len: int
):
    """Reduced paths of length <= max_len inside `allowed` with both ends in `endpoints`."""
    oriented = [
        e
        for e in graph.oriented_edges
        if graph.positive(e) in allowed
    ]
    for start in sorted(endpoints):
        stack: List[Tuple[EdgePath, int]] = [(graph.path([], start), 0)]
        while stack:
            p, depth = stack.pop()
            if depth >= max_len:
                continue
            last = p.edges[-1] if p.edges else None
            for e in oriented:
                if graph.edge(e).src != p.dst:
                    continue
                if last is not None and e == inverse_name(last):
                    continue
                q = graph.path(p.edges + (e,), start)
                if q.dst in endpoints:
                    yield q
                stack.append((q, depth + 1))


def verify_rtt(phi: GraphMap, filtration: Filtration, path_bound: int = 6) -> VerificationReport:
    """Check the four train track conditions for the given filtration.

    Conditions on invariance, stratum-boundary edges, and legality of edge
    images are exact.  The essential-image condition quantifies over all paths
    in the lower level, so it is searched only up to `path_bound`.
    """
    g = phi.graph
    report = VerificationReport("rtt")
    strata = analyze_strata(phi, filtration)

    bad = filtration.verify_invariance(phi)
    if bad is None:
        report.add("1:invariance", "verified")
    else:
        report.add("1:invariance", "violated", witness=f"{bad[0]}->{bad[1]}")

    viol2 = None
    for s in strata:
        if s.kind != "exponential":
            continue
        sset = set(s.edges)
        for e in s.edges:
            img = phi.edge_map[e]
            if g.positive(img.edges[0]) not in sset or g.positive(img.edges[-1]) not in sset:
                viol2 = e
                break
        if viol2:
            break
    if viol2 is None:
        report.add("2:exponential-edge-images", "verified")
    else:
        report.add("2:exponential-edge-images", "violated", witness=viol2)

    viol3 = None
    searched = False
    for s in strata:
        if s.kind != "exponential" or s.index == 1:
            continue
        i = s.index
        lower = filtration.level_edges(i - 1)
        if not lower:
            continue
        boundary = frozenset(
            v
            for e in s.edges
            for v in (g.edge(e).src, g.edge(e).dst)
            if any(g.edge(f).src == v or g.edge(f).dst == v for f in lower)
        )
        if not boundary:
            continue
        searched = True
        for p in _immersed_paths_between(g, lower, boundary, path_bound):
            if len(tighten(phi.apply(p))) == 0:
                viol3 = p.word()
                break
        if viol3:
            break
    if viol3 is not None:
        report.add("3:essential-lower-paths", "violated", witness=viol3)
    elif searched:
        report.add("3:essential-lower-paths", "unknown-up-to-bound", bound=path_bound)
    else:
        report.add("3:essential-lower-paths", "verified", detail="vacuous")

    viol4 = None
    for s in strata:
        if s.kind != "exponential":
            continue
        lower = filtration.level_edges(s.index - 1)
        for e in s.edges:
            img = phi.edge_map[e]
            for k in range(len(img) - 1):
                c = turn_collision(phi, inverse_name(img.edges[k]), img.edges[k + 1])
                if c is not None and g.positive(c) not in lower:
                    viol4 = f"{e}: turn at position {k + 1}"
                    break
            if viol4:
                break
        if viol4:
            break
    if viol4 is None:
        report.add("4:legal-edge-images", "verified")
    else:
        report.add("4:legal-edge-images", "violated", witness=viol4)
    return report


def _tree_components(graph: Graph, edges: FrozenSet[str]) -> List[Tuple[FrozenSet[str], bool]]:
    """Connected components of the subgraph spanned by `edges`: (edge set, is tree)."""
    verts = set()
    for e in edges:
        verts.add(graph.edge(e).src)
        verts.add(graph.edge(e).dst)
    parent = {v: v for v in verts}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in edges:
        a, b = find(graph.edge(e).src), find(graph.edge(e).dst)
        if a != b:
            parent[a] = b
    comps: Dict[str, List[str]] = {}
    for e in edges:
        comps.setdefault(find(graph.edge(e).src), []).append(e)
    out = []
    for root, comp_edges in sorted(comps.items()):
        vs = set()
        for e in comp_edges:
            vs.add(graph.edge(e).src)
            vs.add(graph.edge(e).dst)
        out.append((frozenset(comp_edges), len(vs) == len(comp_edges) + 1))
    return out


def verify_improved(
    phi: GraphMap,
    filtration: Filtration,
    nielsen_len: int = 4,
    nielsen_iter: int = 4,
) -> VerificationReport:
    """Check the extra conditions layered on top of the train track axioms.

    Zero-stratum and polynomial-stratum conditions are exact; aperiodicity is
    primitivity of each exponential matrix (Wielandt power bound); the Nielsen
    condition is searched only up to the given bounds.
    """
    g = phi.graph
    report = VerificationReport("improved")
    strata = analyze_strata(phi, filtration)
    by_index = {s.index: s for s in strata}

    viol = None
    for s in strata:
        if s.kind == "zero":
            nxt = by_index.get(s.index + 1)
            if nxt is None or nxt.kind != "exponential":
                viol = f"stratum {s.index}"
                break
    report.add(
        "1:zero-below-exponential",
        "verified" if viol is None else "violated",
        witness=viol,
    )

    viol = None
    for s in strata:
        if s.kind != "zero":
            continue
        level = filtration.level_edges(s.index)
        tree_edges = frozenset().union(
            *[c for c, is_tree in _tree_components(g, level) if is_tree]
        ) if level else frozenset()
        if tree_edges != frozenset(s.edges):
            viol = f"stratum {s.index}"
            break
    report.add(
        "2:zero-is-contractible-part",
        "verified" if viol is None else "violated",
        witness=viol,
    )

    viol = None
    periodic_edges = []
    for s in strata:
        if s.kind != "polynomial":
            continue
        if len(s.edges) != 1:
            viol = f"stratum {s.index}: not a single edge"
            break
        e = s.edges[0]
        img = phi.edge_map[e]
        if img.edges[0] != e:
            viol = f"stratum {s.index}: image of {e} does not start with {e}"
            break
        tail = g.path(img.edges[1:]) if len(img) > 1 else None
        if tail is None:
            periodic_edges.append(e)
            srcv = g.edge(e).src
            if phi.vertex_map[srcv] != srcv:
                viol = f"stratum {s.index}: initial vertex not fixed"
                break
            continue
        lower = filtration.level_edges(s.index - 1)
        if tail.src != tail.dst or any(g.positive(f) not in lower for f in tail.edges):
            viol = f"stratum {s.index}: suffix not a closed lower-level path"
            break
        if phi.vertex_map[tail.src] != tail.src:
            viol = f"stratum {s.index}: suffix base point not fixed"
            break
    report.add(
        "3:polynomial-form",
        "verified" if viol is None else "violated",
        witness=viol,
        detail=f"periodic edges: {sorted(periodic_edges)}" if periodic_edges else "",
    )

    viol = None
    for s in strata:
        if s.kind != "exponential":
            continue
        if not _is_primitive(s.matrix):
            viol = f"stratum {s.index}"
            break
    report.add(
        "4:exponential-aperiodicity",
        "verified" if viol is None else "violated",
        witness=viol,
    )

    witness = None
    for p in find_nielsen_paths(phi, nielsen_len, nielsen_iter):
        if tighten(phi.apply(p)) != p:
            witness = p.word()
            break
    if witness is not None:
        report.add("5:periodic-nielsen-are-nielsen", "violated", witness=witness)
    else:
        report.add(
            "5:periodic-nielsen-are-nielsen",
            "unknown-up-to-bound",
            bound=nielsen_len,
            detail=f"paths up to length {nielsen_len}, iterates up to {nielsen_iter}",
        )
    return report


def _is_primitive(matrix: Sequence[Sequence[int]]) -> bool:
    """Some power strictly positive; Wielandt's bound (n-1)^2 + 1 caps the search."""
    n = len(matrix)
    bound = (n - 1) ** 2 + 1
    cur = [[bool(x) for x in row] for row in matrix]
    base = cur
    for _ in range(bound):
        if all(all(row) for row in cur):
            return True
        cur = [
            [any(cur[i][k] and base[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
    return False


def edge_weight_limit_check(
    phi: GraphMap, stratum: Stratum, e: str, n: int
) -> List[float]:
    """lam^-m times the weighted stratum length of phi^m(e), for m = 0..n.

    With the eigenvector weights this sequence is constant, equal to the weight
    of e.  Counts use exact integer arithmetic on occurrence vectors.
    """
    if e not in stratum.edges:
        raise StrataError(f"edge {e!r} is not in stratum {stratum.index}")
    if stratum.kind == "zero":
        raise StrataError("zero strata have no growth limit")
    g = phi.graph
    all_edges = list(g.positive_edges)
    idx = {f: k for k, f in enumerate(all_edges)}
    counts = {
        f: [0] * len(all_edges) for f in all_edges
    }
    for f in all_edges:
        for name, c in _letter_counts(phi, f).items():
            counts[f][idx[name]] = c
    vec = [0] * len(all_edges)
    vec[idx[e]] = 1
    out: List[float] = []
    lam = stratum.lam or 1.0
    for m in range(n + 1):
        weighted = sum(
            vec[idx[f]] * stratum.omega[f] for f in stratum.edges
        )
        out.append(weighted / lam**m)
        vec = [
            sum(vec[idx[f]] * counts[f][j] for f in all_edges)
            for j in range(len(all_edges))
        ]
    return out


def _reduced_paths_up_to(graph: Graph, max_len: int):
    for start in graph.vertices:
        stack = [graph.path([], start)]
        while stack:
            p = stack.pop()
            if len(p) >= max_len:
                continue
            last = p.edges[-1] if p.edges else None
            for e in sorted(graph.edges_at(p.dst)):
                if last is not None and e == inverse_name(last):
                    continue
                q = graph.path(p.edges + (e,), start)
                yield q
                stack.append(q)


def find_nielsen_paths(phi: GraphMap, max_len: int, max_iter: int) -> List[EdgePath]:
    """All reduced paths P, |P| <= max_len, with tighten(phi^k(P)) = P for some
    k <= max_iter.  Exhaustive within the bounds; sorted by (length, word)."""
    if max_len < 1 or max_iter < 1:
        raise StrataError("bounds must be positive")
    found = []
    for p in _reduced_paths_up_to(phi.graph, max_len):
        q = p
        for _ in range(max_iter):
            q = tighten(phi.apply(q))
            if q == p:
                found.append(p)
                break
    return sorted(found, key=lambda p: (len(p), p.word()))


@dataclass(frozen=True)
class SplitResult:
    """Splitting-point candidates for a path under iteration.

    `n_applied` substitutions were performed before reporting; `path` is the
    tightened result and `positions` marks each inter-edge position with
    whether it stayed cancellation-free for every further iterate up to the
    stabilization bound.
    """

    n_applied: int
    path: EdgePath
    positions: Tuple[Tuple[int, bool], ...]


def _position_persists(phi: GraphMap, left: EdgePath, right: EdgePath, steps: int) -> bool:
    a, b = left, right
    for _ in range(steps):
        a = tighten(phi.apply(a))
        b = tighten(phi.apply(b))
        if len(a) == 0 or len(b) == 0:
            return False
        if a.edges[-1] == inverse_name(b.edges[0]):
            return False
    return True


def split_path(phi: GraphMap, p: EdgePath, stabilization_bound: int = 5) -> SplitResult:
    """Find inter-edge positions that persist under iteration.

    Starting from tighten(p), the path is iterated until some position stays
    uncancelled for all

    further checked iterates; if none ever appears the positions of tighten(p)
    are reported with persistent=False.
    """
    base = tighten(p)
    first: Optional[SplitResult] = None
    cur = base
    for n in range(stabilization_bound + 1):
        positions = []
        for j in range(1, len(cur)):
            left = phi.graph.path(cur.edges[:j], cur.src)
            right = phi.graph.path(cur.edges[j:])
            positions.append((j, _position_persists(phi, left, right, stabilization_bound)))
        result = SplitResult(n, cur, tuple(positions))
        if first is None:
            first = result
        if any(ok for _, ok in positions):
            return result
        cur = tighten(phi.apply(cur))
    assert first is not None
    return first


@dataclass(frozen=True)
class AtoroidalReport:
    """Outcome of the bounded fixed-conjugacy-class search."""

    word_bound: int
    iter_bound: int
    witness: Optional[Tuple[str, int]]
    inverted_witness: Optional[Tuple[str, int]]

    @property
    def found(self) -> bool:
        return self.witness is not None or self.inverted_witness is not None


def _cyclic_reduce(word: Tuple[str, ...]) -> Tuple[str, ...]:
    w = list(word)
    while len(w) >= 2 and w[0] == inverse_name(w[-1]):
        w = w[1:-1]
    return tuple(w)


def _cyclic_canonical(word: Tuple[str, ...]) -> Tuple[str, ...]:
    if not word:
        return word
    return min(word[i:] + word[:i] for i in range(len(word)))


def _cyclic_words(graph: Graph, max_len: int):
    """Cyclically reduced words up to rotation, ordered by (length, letters),
    with positive edges enumerated before their inverses."""
    oriented = sorted(graph.oriented_edges, key=lambda d: (d.lower(), d != d.lower()))
    for n in range(1, max_len + 1):
        for letters in itertools.product(oriented, repeat=n):
            w = tuple(letters)
            if any(w[i + 1] == inverse_name(w[i]) for i in range(n - 1)):
                continue
            if n > 1 and w[0] == inverse_name(w[-1]):
                continue
            if _cyclic_canonical(w) != w:
                continue
            yield w


def atoroidal_heuristic(
    phi: GraphMap, word_bound: int, iter_bound: int
) -> AtoroidalReport:
    """Search cyclic words w, |w| <= word_bound, whose class is preserved by
    some iterate k <= iter_bound; inversion hits are reported separately.

    Requires a one-vertex graph so that edge words are group elements.
    """
    g = phi.graph
    if not g.is_rose():
        raise StrataError("atoroidal search needs a one-vertex graph (or a marking)")
    if word_bound < 1 or iter_bound < 1:
        raise StrataError("bounds must be positive")
    witness = None
    inverted = None
    base = g.vertices[0]
    for w in _cyclic_words(g, word_bound):
        target = _cyclic_canonical(w)
        target_inv = _cyclic_canonical(
            _cyclic_reduce(tuple(inverse_name(x) for x in reversed(w)))
        )
        cur = g.path(w, base)
        for k in range(1, iter_bound + 1):
            cur = tighten(phi.apply(cur))
            red = _cyclic_canonical(_cyclic_reduce(cur.edges))
            if witness is None and red == target:
                witness = ("".join(w), k)
            if inverted is None and red == target_inv and target_inv != target:
                inverted = ("".join(w), k)
            if witness and inverted:
                break
        if witness:
            break
    return AtoroidalReport(word_bound, iter_bound, witness, inverted)
