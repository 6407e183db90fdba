"""Command-line surface: reproducible analyses with JSON/DOT artifacts.

Exit codes: 0 ok, 1 violated invariant or witness found, 2 usage or schema
error, 3 resource cap.  Outputs are deterministic for fixed inputs.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from . import io as fio
from .flow import BallPoint, PointV, flow_step, leaf_trace, tunnel
from .graph import GraphError
from .strata import (
    StrataError,
    analyze_strata,
    atoroidal_heuristic,
    compute_maximal_filtration,
    edge_weights,
    find_nielsen_paths,
    verify_improved,
    verify_rtt,
)
from .torus import BallResourceError, TorusError, build_ball, build_torus_power
from .cutting import (
    CuttingConfig,
    CuttingError,
    LevelTrace,
    crossing_parity,
    cut_check,
    dual_cube_complex,
    path_from_vertices,
    side_assignment,
)
from .walls import (
    WallError,
    approximate,
    build_immersed_wall,
    canonical_busts,
    classify_nuclei,
    cocycle_check,
    distortion_report,
    exceptional_zones,
    lift_wall,
    secondary_busts,
)

OK, VIOLATED, USAGE, RESOURCE = 0, 1, 2, 3


def _write(out_dir: Optional[str], name: str, text: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
    else:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text, encoding="utf-8")


def _load(args):
    phi, filtration = fio.load_map_file(args.input)
    if filtration is None:
        filtration = compute_maximal_filtration(phi)
    return phi, filtration


def _strata_payload(strata) -> dict:
    return {
        "strata": [
            {
                "index": s.index,
                "edges": list(s.edges),
                "matrix": [list(r) for r in s.matrix],
                "kind": s.kind,
                "lambda": None if s.lam is None else round(s.lam, 12),
                "omega": {e: round(w, 12) for e, w in s.omega.items()},
            }
            for s in strata
        ]
    }


def cmd_analyze(args) -> int:
    phi, filtration = _load(args)
    strata = analyze_strata(phi, filtration)
    payload = _strata_payload(strata)
    payload["levels"] = [sorted(l) for l in filtration.levels]
    _write(args.out, "strata.json", fio.report(payload, "strata"))
    return OK


def cmd_verify(args) -> int:
    phi, filtration = _load(args)
    r1 = verify_rtt(phi, filtration, path_bound=args.bound)
    r2 = verify_improved(phi, filtration, nielsen_len=args.bound, nielsen_iter=args.iter)
    payload = {"train_track": r1.to_json(), "improved": r2.to_json()}
    _write(args.out, "verify.json", fio.report(payload, "verify"))
    return OK if (r1.ok and r2.ok) else VIOLATED


def cmd_torus(args) -> int:
    phi, _ = _load(args)
    tor = build_torus_power(phi, args.L)
    payload = {
        "power": tor.power,
        "euler_characteristic": tor.euler_characteristic,
        "cells": {
            "vertices": len(tor.vertices),
            "vertical": len(tor.vertical),
            "horizontal": len(tor.horizontal),
            "squares": len(tor.boundaries),
        },
        "boundaries": {e: list(w) for e, w in sorted(tor.boundaries.items())},
        "closed": all(tor.boundary_is_closed(e) for e in tor.boundaries),
    }
    _write(args.out, "torus.json", fio.report(payload, "torus"))
    return OK if payload["closed"] and tor.euler_characteristic == 0 else VIOLATED


def _ball(phi, filtration, args):
    strata = analyze_strata(phi, filtration)
    weights = edge_weights(strata)
    return (
        build_ball(phi, weights, args.radius, vertex_cap=args.cap),
        strata,
        weights,
    )


def cmd_ball(args) -> int:
    phi, filtration = _load(args)
    ball, _, _ = _ball(phi, filtration, args)
    if args.format == "dot":
        _write(args.out, "ball.dot", fio.ball_dot(ball))
    else:
        _write(args.out, "ball.json", fio.report(fio.ball_json(ball), "ball"))
    return OK


def _canonical_wall(phi, filtration, L):
    strata = analyze_strata(phi, filtration)
    cb = canonical_busts(phi, strata)
    if L % cb.lcm:
        raise WallError(f"tunnel length {L} must be a multiple of {cb.lcm}")
    busts = secondary_busts(phi, cb.points, L)
    return build_immersed_wall(phi, busts), strata


def cmd_wall(args) -> int:
    phi, filtration = _load(args)
    wall, _ = _canonical_wall(phi, filtration, args.L)
    zoo = classify_nuclei(wall)
    coc = cocycle_check(phi, wall)
    payload = fio.wall_json(wall)
    payload["zoology"] = [
        {"nucleus": z.index, "type": z.kind, "trivial": z.trivial} for z in zoo
    ]
    payload["cocycle"] = {
        "cell_counts": coc.cell_counts,
        "odd_cells": coc.odd_cells,
        "two_sided": coc.two_sided,
        "holonomies": [[cid, h] for cid, h in coc.holonomies],
    }
    if args.format == "dot":
        _write(args.out, "wall.dot", fio.wall_dot(wall))
    else:
        _write(args.out, "wall.json", fio.report(payload, "wall"))
    return OK if coc.all_even else VIOLATED


def _seed_cell(ball, wall):
    d = wall.busts.primaries[0]
    for label in ball.ordered_labels():
        if ball.vertices[label].height != 0:
            continue
        vid = (label, d.edge)
        if vid in ball.vertical and ball.square_above(vid) is not None:
            return (vid, d.s)
    raise WallError("no seed cell for the first primary bust at height 0")


def cmd_approx(args) -> int:
    phi, filtration = _load(args)
    wall, strata = _canonical_wall(phi, filtration, args.L)
    ball, _, _ = _ball(phi, filtration, args)
    trace = lift_wall(wall, ball, _seed_cell(ball, wall))
    approx = approximate(trace)
    zones = exceptional_zones(trace, approx)
    dist = distortion_report(approx, ball, args.samples, seed=args.seed)
    payload = {
        "trace": fio.trace_json(trace),
        "acyclic": approx.acyclic,
        "approx_truncated": approx.truncated,
        "distortion": {
            "pairs": dist.pairs,
            "max_multiplicative": round(dist.max_multiplicative, 9),
            "max_additive": round(dist.max_additive, 9),
        },
    }
    payload.update(fio.zones_json(zones))
    _write(args.out, "approx.json", fio.report(payload, "approx"))
    return OK if approx.acyclic else VIOLATED


def cmd_cut(args) -> int:
    phi, filtration = _load(args)
    wall, strata = _canonical_wall(phi, filtration, args.L)
    ball, _, _ = _ball(phi, filtration, args)
    trace = lift_wall(wall, ball, _seed_cell(ball, wall))
    core = max(args.radius - 1.0, 0.0)
    from .cutting import seed_across_wall

    sides = side_assignment(
        ball, trace, seeds=seed_across_wall(ball, trace), core_radius=core
    )
    payload = {
        "classes": sides.classes,
        "consistent": sides.consistent,
        "classified": len(sides.side),
        "core_radius": core,
    }
    mismatches = 0
    checks = []
    if sides.ok:
        import random

        rng = random.Random(args.seed)
        labels = [
            l
            for l in ball.ordered_labels()
            if l in sides.side and ball.vertices[l].dist <= core / 2
        ]
        done = 0
        attempts = 0
        while done < args.samples and attempts < 20 * args.samples and len(labels) > 1:
            attempts += 1
            x, y = rng.sample(labels, 2)
            gpath, _ = _geodesic_path(ball, x, y)
            from .cutting import path_vertices

            if any(
                v not in sides.side or ball.vertices[v].dist > core
                for v in path_vertices(ball, gpath)
            ):
                continue
            _, parity = crossing_parity(ball, trace, gpath)
            flip = cut_check(ball, trace, x, y, sides)
            ok = (parity == 1) == flip
            mismatches += 0 if ok else 1
            checks.append({"x": x, "y": y, "parity": parity, "cut": flip, "ok": ok})
            done += 1
    payload["checks"] = checks
    payload["mismatches"] = mismatches
    _write(args.out, "cut.json", fio.report(payload, "cut"))
    return OK if sides.ok and mismatches == 0 else VIOLATED


def _geodesic_path(ball, x, y):
    from .torus import geodesic_in_ball

    labels, length = geodesic_in_ball(ball, x, y)
    return path_from_vertices(ball, labels), length


def cmd_dual(args) -> int:
    phi, filtration = _load(args)
    wall, strata = _canonical_wall(phi, filtration, args.L)
    ball, _, _ = _ball(phi, filtration, args)
    trace = lift_wall(wall, ball, _seed_cell(ball, wall))
    # pair the wall with a height wall placed off the nucleus levels
    traces = [trace, LevelTrace(ball, 1)]
    dual = dual_cube_complex(ball, traces, core_radius=max(args.radius - 1.0, 0.0))
    payload = fio.dual_json(dual)
    if args.format == "dot":
        _write(args.out, "dual.dot", fio.dual_dot(dual))
    else:
        _write(args.out, "dual.json", fio.report(payload, "dual"))
    return OK


def cmd_nielsen(args) -> int:
    phi, _ = _load(args)
    paths = find_nielsen_paths(phi, args.bound, args.iter)
    payload = {"paths": [p.word() for p in paths], "bound": args.bound, "iterates": args.iter}
    _write(args.out, "nielsen.json", fio.report(payload, "nielsen"))
    return OK


def cmd_atoroidal(args) -> int:
    phi, _ = _load(args)
    rep = atoroidal_heuristic(phi, args.bound, args.iter)
    payload = {
        "word_bound": rep.word_bound,
        "iter_bound": rep.iter_bound,
        "witness": list(rep.witness) if rep.witness else None,
        "inverted_witness": list(rep.inverted_witness) if rep.inverted_witness else None,
    }
    _write(args.out, "atoroidal.json", fio.report(payload, "atoroidal"))
    return VIOLATED if rep.found else OK


def cmd_flow(args) -> int:
    phi, _ = _load(args)
    p = PointV.interior(phi, args.edge, Fraction(args.pos))
    orbit = [str(p)]
    q = p
    for _ in range(args.steps):
        q = flow_step(phi, q)
        orbit.append(str(q))
        if q.is_vertex:
            break
    t = tunnel(phi, p, args.L)
    payload = {
        "point": str(p),
        "orbit": orbit,
        "tunnel": fio.tunnel_json(t),
    }
    if args.format == "dot":
        _write(args.out, "tunnel.dot", fio.tunnel_dot(t))
    else:
        _write(args.out, "flow.json", fio.report(payload, "flow"))
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fbcwalls",
        description="Analyze graph self-maps, mapping tori, walls, and dual cube complexes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, radius=False, L=False):
        p.add_argument("--input", required=True, help="JSON graph-map file")
        p.add_argument("--out", default=None, help="output directory (default: stdout)")
        p.add_argument("--format", choices=("json", "dot"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=10**6, help="ball vertex cap")
        if radius:
            p.add_argument("--radius", type=float, required=True)
        if L:
            p.add_argument("-L", type=int, default=1, dest="L")

    p = sub.add_parser("analyze", help="strata report")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="train-track axiom checks")
    common(p)
    p.add_argument("--bound", type=int, default=4)
    p.add_argument("--iter", type=int, default=4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("torus", help="mapping torus cell structure")
    common(p, L=True)
    p.set_defaults(func=cmd_torus)

    p = sub.add_parser("ball", help="finite ball of the universal cover")
    common(p, radius=True)
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("wall", help="canonical immersed wall, zoology, cocycle")
    common(p, L=True)
    p.set_defaults(func=cmd_wall)

    p = sub.add_parser("approx", help="wall lift, approximation, zones, distortion")
    common(p, radius=True, L=True)
    p.add_argument("--samples", type=int, default=20)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("cut", help="sides, parity, cut checks")
    common(p, radius=True, L=True)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--delta", type=float, default=0.0)
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("dual", help="dual cube complex of ball walls")
    common(p, radius=True, L=True)
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("nielsen", help="bounded fixed-path search")
    common(p)
    p.add_argument("--bound", type=int, default=3)
    p.add_argument("--iter", type=int, default=4)
    p.set_defaults(func=cmd_nielsen)

    p = sub.add_parser("atoroidal", help="bounded fixed-conjugacy-class search")
    common(p)
    p.add_argument("--bound", type=int, default=4)
    p.add_argument("--iter", type=int, default=2)
    p.set_defaults(func=cmd_atoroidal)

    p = sub.add_parser("flow", help="orbits and preimage trees")
    common(p, L=True)
    p.add_argument("--edge", required=True)
    p.add_argument("--pos", required=True, help="rational position like 2/3")
    p.add_argument("--steps", type=int, default=6)
    p.set_defaults(func=cmd_flow)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    try:
        return args.func(args)
    except fio.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return USAGE
    except BallResourceError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return RESOURCE
    except (GraphError, StrataError, TorusError, WallError, CuttingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
