"""Desk-scale separation machinery over ball-restricted walls.

Crossing parities, two-sided vertex colorings, cut checks, forward push-crops,
deviation measurement against flow paths, window lifts with interpolated
backtracks, and the dual cube complex of a finite wall family.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .torus import BallComplex
from .walls import WallTrace


class CuttingError(ValueError):
    pass


@dataclass(frozen=True)
class CuttingConfig:
    """Tuning constants; the hyperbolicity constant is supplied, not computed,
    so every verdict that uses it is relative to this configuration."""

    delta: float = 0.0
    deviation_threshold: Optional[int] = 3  # None means "always deviating"
    push_depth: int = 1
    fellow_travel_tolerance: float = 0.0

    def __post_init__(self):
        if self.delta < 0 or self.fellow_travel_tolerance < 0 or self.push_depth < 0:
            raise CuttingError("configuration constants must be nonnegative")


# A combinatorial path in a ball: start label plus (kind, cell id, direction).
Move = Tuple[str, object, int]
BallPath = Tuple[str, Tuple[Move, ...]]


def path_vertices(ball: BallComplex, path: BallPath) -> List[str]:
    start, moves = path
    out = [start]
    cur = start
    for kind, cid, sign in moves:
        if kind == "v":
            cell = ball.vertical[cid]
            cur = cell.dst if sign > 0 else cell.src
        else:
            cell = ball.horizontal[cid]
            cur = cell.upper if sign > 0 else cell.lower
        out.append(cur)
    return out


def path_from_vertices(ball: BallComplex, labels: Sequence[str]) -> BallPath:
    moves: List[Move] = []
    for a, b in zip(labels, labels[1:]):
        for u, _, move in ball.neighbors(a):
            if u == b:
                moves.append(move)
                break
        else:
            raise CuttingError(f"vertices {a!r}, {b!r} are not adjacent")
    return (labels[0], tuple(moves))


# ---------------------------------------------------------------------------
# crossings and sides

TraceLike = Union[WallTrace, "LevelTrace"]


@dataclass
class LevelTrace:
    """The height wall between levels m and m+1: it crosses every horizontal
    cell spanning that gap and nothing else.  Useful as a test fixture and a
    second wall family for dual-complex runs."""

    ball: BallComplex
    level: int

    @property
    def crossings_v(self) -> Dict:
        return {}

    @property
    def crossings_h(self) -> Dict[str, List[Tuple[Fraction, int]]]:
        out = {}
        for hid, cell in self.ball.horizontal.items():
            if self.ball.vertices[cell.lower].height == self.level:
                out[hid] = [(Fraction(1, 2), 0)]
        return out


def crossing_parity(ball: BallComplex, trace: TraceLike, path: BallPath) -> Tuple[int, int]:
    """Exact crossing count of a combinatorial path with a wall trace, and its
    parity.  Endpoints are vertices, which never lie on a wall, so every
    contact is transverse."""
    count = 0
    for kind, cid, _sign in path[1]:
        if kind == "v":
            count += len(trace.crossings_v.get(cid, []))
        else:
            count += len(trace.crossings_h.get(cid, []))
    return count, count % 2


@dataclass
class SideAssignment:
    classes: int
    side: Dict[str, int]  # vertex label -> 0 (left) or 1 (right)
    consistent: bool
    violations: List[Tuple[str, str]] = field(default_factory=list)
    seeded: bool = False

    @property
    def ok(self) -> bool:
        return self.classes == 2 and self.consistent


def odd_cells(ball: BallComplex, trace: TraceLike) -> List[Tuple[str, object]]:
    """Cells the trace crosses an odd number of times, nearest the base first.
    These are the single-sheet crossings where sides genuinely flip."""
    out = []
    for vid, pts in trace.crossings_v.items():
        if len(pts) % 2:
            c = ball.vertical[vid]
            depth = max(ball.vertices[c.src].dist, ball.vertices[c.dst].dist)
            out.append((depth, ("v", vid)))
    for hid, sts in trace.crossings_h.items():
        if len(sts) % 2:
            c = ball.horizontal[hid]
            depth = max(ball.vertices[c.lower].dist, ball.vertices[c.upper].dist)
            out.append((depth, ("h", hid)))
    out.sort(key=lambda t: (t[0], str(t[1])))
    return [cell for _, cell in out]


def seed_across_wall(ball: BallComplex, trace: TraceLike) -> Tuple[str, str]:
    """Endpoints of the innermost odd cell: one vertex on each side."""
    cells = odd_cells(ball, trace)
    if not cells:
        raise CuttingError("trace has no odd crossing cell to seed from")
    kind, cid = cells[0]
    if kind == "v":
        c = ball.vertical[cid]
        return (c.src, c.dst)
    c = ball.horizontal[cid]
    return (c.lower, c.upper)


def side_assignment(
    ball: BallComplex,
    trace: TraceLike,
    seeds: Optional[Tuple[str, str]] = None,
    core_radius: Optional[float] = None,
) -> SideAssignment:
    """Group ball vertices along even-crossing edges.

    Global mode (no seeds): union-find over every vertex; a cleanly separating
    trace gives exactly two classes, and any other count is reported, not
    raised, since truncation at the ball boundary legitimately interferes.

    Seeded mode: explore from the two given vertices only, optionally inside a
    core radius that excludes the outermost shell where truncated wall lifts
    leave parity artifacts.  Classes is 2 when the explored sides stay
    disjoint, else 1; unreached vertices are left unclassified.
    """
    labels = ball.ordered_labels()
    keep = set(labels)
    if core_radius is not None:
        keep = {l for l in labels if ball.vertices[l].dist <= core_radius + 1e-12}

    def parity(move) -> int:
        kind, cid, _ = move
        if kind == "v":
            return len(trace.crossings_v.get(cid, [])) % 2
        return len(trace.crossings_h.get(cid, [])) % 2

    if seeds is not None:
        from collections import deque

        x, y = seeds
        if x not in keep or y not in keep:
            raise CuttingError("seeds must lie inside the evaluation core")
        side: Dict[str, int] = {}
        merged = False
        for s, start in enumerate((x, y)):
            if start in side:
                merged = True
                continue
            side[start] = s
            queue = deque([start])
            while queue:
                v = queue.popleft()
                for u, _, move in ball.neighbors(v):
                    if u not in keep or parity(move):
                        continue
                    if u in side:
                        if side[u] != s:
                            merged = True
                        continue
                    side[u] = s
                    queue.append(u)
        classes = 1 if merged else 2
        violations = [(x, y)] if merged else []
        # canonical labels: the class of the least classified vertex is 0
        if not merged and side:
            least = min(side, key=lambda l: (ball.vertices[l].height, l))
            if side[least] == 1:
                side = {l: 1 - s for l, s in side.items()}
        return SideAssignment(classes, side, not merged, violations, seeded=True)

    parent: Dict[str, str] = {l: l for l in keep}

    def find(a: str) -> str:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    odd_edges: List[Tuple[str, str]] = []
    for vid, cell in ball.vertical.items():
        if cell.src not in keep or cell.dst not in keep:
            continue
        if len(trace.crossings_v.get(vid, [])) % 2 == 0:
            union(cell.src, cell.dst)
        else:
            odd_edges.append((cell.src, cell.dst))
    for hid, cell in ball.horizontal.items():
        if cell.lower not in keep or cell.upper not in keep:
            continue
        if len(trace.crossings_h.get(hid, [])) % 2 == 0:
            union(cell.lower, cell.upper)
        else:
            odd_edges.append((cell.lower, cell.upper))
    classes = len({find(l) for l in keep})
    side: Dict[str, int] = {}
    consistent = True
    violations = []
    if classes == 2:
        left_root = find(min(keep, key=lambda l: (ball.vertices[l].height, l)))
        for l in keep:
            side[l] = 0 if find(l) == left_root else 1
        for a, b in odd_edges:
            if side[a] == side[b]:
                consistent = False
                violations.append((a, b))
    else:
        for a, b in odd_edges:
            if find(a) == find(b):
                consistent = False
                violations.append((a, b))
    return SideAssignment(classes, side, consistent, violations)


def cut_check(
    ball: BallComplex, trace: TraceLike, x: str, y: str, sides: Optional[SideAssignment] = None
) -> bool:
    """Do the two vertices sit on opposite sides of the trace?  A ball-scale
    proxy for boundary separation."""
    sides = side_assignment(ball, trace) if sides is None else sides
    if not sides.ok:
        raise CuttingError(f"trace does not separate: {sides.classes} classes")
    if x not in sides.side or y not in sides.side:
        raise CuttingError("query vertices are not classified by this assignment")
    return sides.side[x] != sides.side[y]


# ---------------------------------------------------------------------------
# push-crops and deviation


def push_crop(ball: BallComplex, path: BallPath, depth: int) -> BallPath:
    """Flow a combinatorial path forward `depth` levels, then remove backtracks
    and excise any loops so the result is embedded."""
    if depth < 0:
        raise CuttingError("depth must be >= 0")
    labels = path_vertices(ball, path)
    cur = labels
    for _ in range(depth):
        nxt: List[str] = []
        for a, b in zip(cur, cur[1:]):
            up_a = ball.up_label(a)
            up_b = ball.up_label(b)
            if up_a is None or up_b is None:
                raise CuttingError("flow leaves the ball")
            seg = _image_of_step(ball, a, b)
            if not nxt:
                nxt.append(up_a)
            nxt.extend(seg[1:])
        if not nxt:
            up = ball.up_label(cur[0])
            if up is None:
                raise CuttingError("flow leaves the ball")
            nxt = [up]
        cur = nxt
    cur = _remove_backtracks(cur)
    cur = _excise_loops(cur)
    return path_from_vertices(ball, cur)


def _image_of_step(ball: BallComplex, a: str, b: str) -> List[str]:
    """Vertex sequence of the one-level image of a single 1-cell, unreduced."""
    for u, _, move in ball.neighbors(a):
        if u != b:
            continue
        kind, cid, sign = move
        if kind == "h":
            ua, ub = ball.up_label(a), ball.up_label(b)
            if ua is None or ub is None:
                raise CuttingError("flow leaves the ball")
            return [ua, ub]
        sq = ball.square_above(cid)
        if sq is None:
            raise CuttingError("flow leaves the ball")
        tops = list(sq.top_vertices)
        return tops if sign > 0 else list(reversed(tops))
    raise CuttingError(f"no step from {a!r} to {b!r}")


def _remove_backtracks(labels: List[str]) -> List[str]:
    out: List[str] = []
    for l in labels:
        if len(out) >= 2 and out[-2] == l:
            out.pop()
        else:
            out.append(l)
    return out


def _excise_loops(labels: List[str]) -> List[str]:
    seen: Dict[str, int] = {}
    out: List[str] = []
    for l in labels:
        if l in seen:
            del_from = seen[l] + 1
            for dead in out[del_from:]:
                seen.pop(dead, None)
            out = out[:del_from]
        else:
            out.append(l)
            seen[l] = len(out) - 1
    return out


@dataclass(frozen=True)
class DeviationVerdict:
    max_fellow_travel: int
    verdict: str  # "leaflike" | "deviating"
    witness: Optional[str]  # seed label of the longest fellow-traveled flow path


def deviation_classify(
    ball: BallComplex, path: BallPath, cfg: CuttingConfig
) -> DeviationVerdict:
    """Longest run of a flow path staying near the given path, versus the
    configured threshold.  A desk-scale proxy: only flow paths seeded in the
    tolerance neighborhood inside this ball are scanned."""
    tol = 2 * cfg.delta + cfg.fellow_travel_tolerance
    labels = path_vertices(ball, path)
    base = ball.distances_from(sorted(set(labels)))
    seeds = sorted(l for l, d in base.items() if d <= tol + 1e-12)
    best = 0
    witness = None
    for seed in seeds:
        run = 0
        cur = seed
        while True:
            nxt = ball.up_label(cur)
            if nxt is None or base.get(nxt, float("inf")) > tol + 1e-12:
                break
            run += 1
            cur = nxt
        if run > best:
            best, witness = run, seed
    if cfg.deviation_threshold is None or best < cfg.deviation_threshold:
        return DeviationVerdict(best, "deviating", None)
    return DeviationVerdict(best, "leaflike", witness)


# ---------------------------------------------------------------------------
# lifting paths to the window cover


@dataclass
class LiftedAugmentation:
    """A path upstairs in the length-L window cover, projecting to the original
    path with interpolated backtracks at carrier changes.

    Each backtrack climbs from a disagreement point to the next multiple-of-L
    level and returns; its vertical extent is recorded exactly."""

    depth: int
    moves: List[Tuple[str, object]]  # ("cell", move) | ("backtrack", (label, apex))
    backtracks: List[Tuple[str, str]]  # (at label, apex label)

    @property
    def backtrack_heights(self) -> List[int]:
        return [int(a.split("@")[1]) - int(b.split("@")[1]) for b, a in self.backtracks]


def _carriers_of_vcell(
    ball: BallComplex, vid: Tuple[str, str], down: int
) -> List[Tuple[Tuple[str, str], Fraction, Fraction, int]]:
    """Cells `down` levels below whose iterated tops cover the given cell:
    (base cell, lo, hi, orient); orient +1 when the base's lo end flows onto
    the given cell's source.  Lexicographically ordered."""
    frontier = [(vid, Fraction(0), Fraction(1), +1)]
    for _ in range(down):
        nxt = []
        for cur, lo, hi, o in frontier:
            for sqid, pos, orient in ball.squares_with_top_crossing(cur):
                sq = ball.squares[sqid]
                k = len(sq.top)
                if orient > 0:
                    a, b = Fraction(pos + lo, k), Fraction(pos + hi, k)
                else:
                    a, b = Fraction(pos + 1 - hi, k), Fraction(pos + 1 - lo, k)
                nxt.append((sq.bottom, a, b, o * orient))
        frontier = nxt
    return sorted(frontier)


def lifted_augmentation(
    ball: BallComplex, path: BallPath, depth: int
) -> LiftedAugmentation:
    """Lift a combinatorial path to the window cover of length `depth`.

    Inside a window, a vertical cell is carried by a base cell at the window
    floor; the lift is continuous while consecutive cells share a carrier
    corner, and otherwise jumps via a backtrack whose apex sits at the next
    window floor.  Horizontal moves ride their vertex column, which forces the
    adjoining carrier corner to be a genuine floor vertex.
    """
    if depth < 1:
        raise CuttingError("window depth must be >= 1")
    start, moves = path
    out = LiftedAugmentation(depth, [], [])
    cur = start

    def floor_level(m: int) -> int:
        return (m // depth) * depth

    # carrier state: (base cell, fraction of the current vertex on the base)
    state: Optional[Tuple[Tuple[str, str], Fraction]] = None

    def emit_backtrack(here: str) -> None:
        m = ball.vertices[here].height
        apex_height = floor_level(m) + depth
        apex = here
        while ball.vertices[apex].height < apex_height:
            nxt = ball.up_label(apex)
            if nxt is None:
                raise CuttingError("backtrack apex is outside the ball")
            apex = nxt
        out.moves.append(("backtrack", (here, apex)))
        out.backtracks.append((here, apex))

    for move in moves:
        kind, cid, sign = move
        here = cur
        m = ball.vertices[cur].height
        if kind == "h":
            if state is not None and state[1] not in (Fraction(0), Fraction(1)):
                emit_backtrack(here)
                state = None
            cell = ball.horizontal[cid]
            cur = cell.upper if sign > 0 else cell.lower
            out.moves.append(("cell", move))
            if (ball.vertices[cur].height % depth) == 0:
                state = None  # crossed a window floor
            continue
        off = m - floor_level(m)
        if off == 0:
            if state is not None and state[1] not in (Fraction(0), Fraction(1)):
                emit_backtrack(here)
            out.moves.append(("cell", move))
            cell = ball.vertical[cid]
            cur = cell.dst if sign > 0 else cell.src
            state = None
            continue
        carriers = _carriers_of_vcell(ball, cid, off)
        if not carriers:
            raise CuttingError("window cover cell has no carrier inside the ball")
        cell = ball.vertical[cid]
        going_to = cell.dst if sign > 0 else cell.src

        def fracs(c):
            base, a, b, o = c
            src_frac, dst_frac = (a, b) if o > 0 else (b, a)
            depart = src_frac if sign > 0 else dst_frac
            arrive = dst_frac if sign > 0 else src_frac
            return depart, arrive

        chosen = None
        if state is not None:
            for c in carriers:
                depart, _ = fracs(c)
                if c[0] == state[0] and depart == state[1]:
                    chosen = c
                    break
        if chosen is None:
            if state is not None:
                emit_backtrack(here)
            chosen = carriers[0]
        out.moves.append(("cell", move))
        _, arrive = fracs(chosen)
        state = (chosen[0], arrive)
        cur = going_to
    return out


# ---------------------------------------------------------------------------
# dual cube complex


@dataclass
class DualCubeComplex:
    walls: int
    vertices: List[Tuple[int, ...]]
    edges: List[Tuple[int, int]]  # indices into vertices
    squares: List[Tuple[int, int, int, int]]
    cubes_by_dim: Dict[int, int] = field(default_factory=dict)

    def counts(self) -> Tuple[int, int, int]:
        return len(self.vertices), len(self.edges), len(self.squares)


def dual_cube_complex(
    ball: BallComplex,
    traces: Sequence[TraceLike],
    assignments: Optional[Sequence[SideAssignment]] = None,
    core_radius: Optional[float] = None,
) -> DualCubeComplex:
    """Sageev-style dual complex of finitely many ball walls.

    Vertices are the side vectors realized by ball vertices classified by
    every wall; edges join vectors differing across one wall; higher cubes
    fill whenever all corner vectors are realized.  Walls are sided with the
    seeded assignment by default.
    """
    for i, t1 in enumerate(traces):
        for t2 in traces[i + 1 :]:
            shared_v = set(t1.crossings_v) & set(t2.crossings_v)
            for vc in shared_v:
                s1 = {s for s, _ in t1.crossings_v[vc]}
                s2 = {s for s, _ in t2.crossings_v[vc]}
                if s1 & s2:
                    raise CuttingError("walls overlap at a crossing point")
            for hid in set(t1.crossings_h) & set(t2.crossings_h):
                p1 = {p for p, _ in t1.crossings_h[hid]}
                p2 = {p for p, _ in t2.crossings_h[hid]}
                if p1 & p2:
                    raise CuttingError("walls overlap at a horizontal crossing")
    if assignments is None:
        assignments = []
        for t in traces:
            sa = side_assignment(
                ball, t, seeds=seed_across_wall(ball, t), core_radius=core_radius
            )
            assignments.append(sa)
    for sa in assignments:
        if not sa.ok:
            raise CuttingError(
                f"a trace does not yield two sides (classes={sa.classes})"
            )
    vecs: Set[Tuple[int, ...]] = set()
    for label in ball.ordered_labels():
        if all(label in sa.side for sa in assignments):
            vecs.add(tuple(sa.side[label] for sa in assignments))
    vertices = sorted(vecs)
    index = {v: i for i, v in enumerate(vertices)}
    edges = []
    for v in vertices:
        for k in range(len(traces)):
            w = list(v)
            w[k] ^= 1
            w = tuple(w)
            if w in index and v < w:
                edges.append((index[v], index[w]))
    squares = []
    nwalls = len(traces)
    for v in vertices:
        for k1 in range(nwalls):
            for k2 in range(k1 + 1, nwalls):
                corners = []
                ok = True
                for b1 in (0, 1):
                    for b2 in (0, 1):
                        w = list(v)
                        w[k1], w[k2] = b1, b2
                        w = tuple(w)
                        if w not in index:
                            ok = False
                        corners.append(w)
                if ok and v == min(corners):
                    squares.append(tuple(index[c] for c in corners))
    cubes_by_dim = {0: len(vertices), 1: len(edges), 2: len(squares)}
    dim = 2
    prev = [frozenset(sq) for sq in squares]
    corner_sets = {2: prev}
    while prev:
        dim += 1
        found = set()
        for k in range(nwalls):
            by_flip: Dict[frozenset, frozenset] = {}
            for cube in prev:
                flipped = frozenset(
                    index[tuple(b ^ (1 if i == k else 0) for i, b in enumerate(vertices[c]))]
                    for c in cube
                    if tuple(b ^ (1 if i == k else 0) for i, b in enumerate(vertices[c])) in index
                )
                if len(flipped) == len(cube) and flipped != cube and flipped in set(prev):
                    found.add(cube | flipped)
        prev = sorted(found, key=sorted)
        if prev:
            cubes_by_dim[dim] = len(prev)
            corner_sets[dim] = list(prev)
        else:
            break
    return DualCubeComplex(nwalls, vertices, sorted(edges), sorted(squares), cubes_by_dim)
