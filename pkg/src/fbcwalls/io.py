"""Loading graph maps from JSON and exporting structures as JSON and DOT.

The input schema:

    {"vertices": ["v"],
     "edges": [{"name": "a", "src": "v", "dst": "v"}, ...],
     "vertex_map": {"v": "v"},
     "edge_map": {"a": "b", "b": "ab"},
     "inverse_map": {"a": "bA", "b": "a"},        # optional
     "filtration": [["a"], ["a", "b"]]}           # optional

Words follow the case convention: a lowercase token is an edge, its swapped
case is the inverse.  Schema violations are reported with JSON-pointer paths.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .graph import Graph, GraphError, GraphMap
from .strata import Filtration, StrataError

SCHEMA_VERSION = "1"


class SchemaError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise SchemaError(pointer, message)


def load_map(data: dict) -> Tuple[GraphMap, Optional[Filtration]]:
    _expect(isinstance(data, dict), "", "top level must be an object")
    _expect("vertices" in data, "/vertices", "missing")
    _expect(isinstance(data["vertices"], list), "/vertices", "must be a list")
    _expect("edges" in data, "/edges", "missing")
    _expect(isinstance(data["edges"], list), "/edges", "must be a list")
    edges = []
    for i, rec in enumerate(data["edges"]):
        _expect(isinstance(rec, dict), f"/edges/{i}", "must be an object")
        for key in ("name", "src", "dst"):
            _expect(key in rec, f"/edges/{i}/{key}", "missing")
        edges.append((rec["name"], rec["src"], rec["dst"]))
    try:
        graph = Graph(data["vertices"], edges)
    except GraphError as exc:
        raise SchemaError("/edges", str(exc)) from None
    _expect("vertex_map" in data, "/vertex_map", "missing")
    _expect(isinstance(data["vertex_map"], dict), "/vertex_map", "must be an object")
    _expect("edge_map" in data, "/edge_map", "missing")
    _expect(isinstance(data["edge_map"], dict), "/edge_map", "must be an object")
    edge_map = {}
    for name in graph.positive_edges:
        _expect(name in data["edge_map"], f"/edge_map/{name}", "missing image")
        word = data["edge_map"][name]
        _expect(isinstance(word, str), f"/edge_map/{name}", "must be a word string")
        try:
            edge_map[name] = graph.parse_word(word)
        except GraphError as exc:
            raise SchemaError(f"/edge_map/{name}", str(exc)) from None
    inverse_map = None
    if data.get("inverse_map") is not None:
        _expect(isinstance(data["inverse_map"], dict), "/inverse_map", "must be an object")
        inverse_map = {}
        for name in graph.positive_edges:
            _expect(
                name in data["inverse_map"], f"/inverse_map/{name}", "missing image"
            )
            try:
                inverse_map[name] = graph.parse_word(data["inverse_map"][name])
            except GraphError as exc:
                raise SchemaError(f"/inverse_map/{name}", str(exc)) from None
    try:
        phi = GraphMap(graph, data["vertex_map"], edge_map, inverse_map)
    except GraphError as exc:
        raise SchemaError("/edge_map", str(exc)) from None
    filtration = None
    if data.get("filtration") is not None:
        _expect(isinstance(data["filtration"], list), "/filtration", "must be a list")
        try:
            filtration = Filtration(graph, data["filtration"])
        except (StrataError, GraphError) as exc:
            raise SchemaError("/filtration", str(exc)) from None
    return phi, filtration


def load_map_file(path: str) -> Tuple[GraphMap, Optional[Filtration]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from None
    return load_map(data)


def report(payload: dict, kind: str) -> str:
    doc = {"schema": SCHEMA_VERSION, "kind": kind}
    doc.update(payload)
    return json.dumps(doc, sort_keys=True, indent=2, default=_coerce) + "\n"


def _coerce(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, frozenset):
        return sorted(map(str, obj))
    if isinstance(obj, set):
        return sorted(map(str, obj))
    return str(obj)


def frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_frac(text: str) -> Fraction:
    return Fraction(text)


# ---------------------------------------------------------------------------
# exports


def ball_json(ball) -> dict:
    return {
        "radius": ball.radius,
        "base": ball.base_label,
        "truncated": ball.truncated,
        "vertices": [
            {
                "label": l,
                "height": ball.vertices[l].height,
                "dist": round(ball.vertices[l].dist, 12),
            }
            for l in ball.ordered_labels()
        ],
        "vertical_cells": [
            {"src": c.src, "dst": c.dst, "edge": c.edge, "weight": round(c.weight, 12)}
            for _, c in sorted(ball.vertical.items())
        ],
        "horizontal_cells": [
            {"lower": c.lower, "upper": c.upper} for _, c in sorted(ball.horizontal.items())
        ],
        "squares": [
            {"bottom": list(c.bottom), "top_vertices": list(c.top_vertices)}
            for _, c in sorted(ball.squares.items())
        ],
    }


def ball_dot(ball) -> str:
    lines = ["digraph ball {"]
    for l in ball.ordered_labels():
        lines.append(f'  "{l}" [height_label={ball.vertices[l].height}];')
    for _, c in sorted(ball.vertical.items()):
        lines.append(f'  "{c.src}" -> "{c.dst}" [label="{c.edge}", style=solid];')
    for _, c in sorted(ball.horizontal.items()):
        lines.append(f'  "{c.lower}" -> "{c.upper}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tunnel_json(t) -> dict:
    return {
        "root": str(t.root),
        "depth": t.depth,
        "levels": [
            [
                {"point": str(n.point), "parent": n.parent, "sign": n.sign}
                for n in level
            ]
            for level in t.levels
        ],
        "leaves": [
            {"point": str(n.point), "parent": n.parent, "sign": n.sign}
            for n in t.leaves
        ],
    }


def tunnel_dot(t) -> str:
    lines = ["digraph tunnel {"]

    def nid(k, i):
        return f"n{k}_{i}"

    for k, level in enumerate(t.levels):
        for i, n in enumerate(level):
            lines.append(f'  {nid(k, i)} [label="{n.point}"];')
            if n.parent is not None:
                lines.append(f"  {nid(k, i)} -> {nid(k - 1, n.parent)};")
    for i, n in enumerate(t.leaves):
        lines.append(f'  leaf{i} [label="{n.point}", shape=box];')
        lines.append(f"  leaf{i} -> {nid(len(t.levels) - 1, n.parent)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def wall_json(wall) -> dict:
    bs = wall.busts
    return {
        "tunnel_length": bs.tunnel_length,
        "primaries": [str(p) for p in bs.primaries],
        "periodic": list(bs.periodic),
        "secondaries": [
            [{"point": str(sb.point), "sign": sb.sign} for sb in per]
            for per in bs.secondaries
        ],
        "nuclei": [
            {
                "index": nd.index,
                "vertices": list(nd.vertices),
                "nodes": sorted(str(n) for n in nd.nodes),
                "segments": [
                    {
                        "edge": wall.punctured.segments[i].edge,
                        "lo": frac_str(wall.punctured.segments[i].lo),
                        "hi": frac_str(wall.punctured.segments[i].hi),
                    }
                    for i in nd.segments
                ],
            }
            for nd in wall.punctured.nuclei
        ],
        "components": len(wall.components),
        "seed_component": wall.seed_component,
        "degenerate": wall.degenerate,
    }


def wall_dot(wall) -> str:
    lines = ["graph wall {"]
    for nd in wall.punctured.nuclei:
        lines.append(f"  subgraph cluster_{nd.index} {{")
        for n in sorted(nd.nodes, key=str):
            lines.append(f'    "{n}";')
        lines.append("  }")
    for c in sorted(wall.cells.values(), key=lambda c: str(c.id)):
        style = "solid" if c.kind == "seg" else "dotted"
        lines.append(f'  "{c.a}" -- "{c.b}" [style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def trace_json(trace) -> dict:
    return {
        "states": len(trace.states),
        "truncated": trace.truncated,
        "crossings_vertical": {
            f"{vid[0]}|{vid[1]}": [frac_str(s) for s, _ in sorted(pts)]
            for vid, pts in sorted(trace.crossings_v.items())
        },
        "crossings_horizontal": sorted(trace.crossings_h),
        "nucleus_lifts": [
            {
                "nucleus": nl["nucleus"],
                "truncated": nl["truncated"],
                "segments": [
                    [f"{vc[0]}|{vc[1]}", frac_str(lo), frac_str(hi)]
                    for vc, lo, hi in nl["segments"]
                ],
            }
            for nl in trace.nucleus_lifts
        ],
        "tunnel_lifts": [
            {
                "tunnel": list(tl["tunnel"]),
                "truncated": tl["truncated"],
                "nodes": len(tl["nodes"]),
            }
            for tl in trace.tunnel_lifts
        ],
    }


def zones_json(zones) -> dict:
    return {
        "zones": [
            {
                "nucleus": z.nucleus,
                "exceptional": z.exceptional,
                "degenerate": z.degenerate,
                "narrow": z.narrow,
                "window_hits": list(z.window_hits),
            }
            for z in zones
        ]
    }


def dual_json(dual) -> dict:
    return {
        "walls": dual.walls,
        "vertices": [list(v) for v in dual.vertices],
        "edges": [list(e) for e in dual.edges],
        "squares": [list(s) for s in dual.squares],
        "cubes_by_dim": {str(k): v for k, v in sorted(dual.cubes_by_dim.items())},
    }


def dual_dot(dual) -> str:
    lines = ["graph dual {"]
    for i, v in enumerate(dual.vertices):
        lines.append(f'  v{i} [label="{"".join(map(str, v))}"];')
    for a, b in dual.edges:
        lines.append(f"  v{a} -- v{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
