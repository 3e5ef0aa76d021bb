"""Command-line surface.

Subcommands: validate, info, enumerate, canon, apply, reduce, replay,
census, walk, gap-search.  Every command is a pure function of its files,
flags and seed; exit codes are 0 (ok), 1 (domain error), 2 (usage error).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import basics, corpus, moves, reducer
from .canon import canonical_code, canonical_code_colored, code_hex
from .coloring import (ColoredPolytope, ColoringError, enumerate_colorings,
                       face_independence, is_orientable, validate_coloring,
                       zero_sum_edges)
from .mesh import MeshError, ScpError, from_scp, to_scp


class DomainError(Exception):
    pass


def _load(path: str, require_valid: bool = True):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    try:
        return from_scp(text, require_valid=require_valid)
    except ScpError as exc:
        raise DomainError(f"{path}: {exc}") from exc


def _load_colored(path: str) -> ColoredPolytope:
    mesh, colors = _load(path)
    if colors is None:
        raise DomainError(f"{path}: no coloring present (needs 'c' records)")
    cp = ColoredPolytope(mesh, colors)
    v = validate_coloring(mesh, colors)
    if v is not None:
        raise DomainError(f"{path}: coloring violates independence at vertex {v}")
    return cp


def _write_out(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    mesh, colors = _load(args.file, require_valid=False)
    report = mesh.validate()
    print(report)
    if colors is not None:
        v = validate_coloring(mesh, colors)
        print(f"coloring: {'ok' if v is None else f'violation at vertex {v}'}")
        if v is not None:
            return 1
    return 0 if report.ok else 1


def cmd_info(args) -> int:
    mesh, colors = _load(args.file)
    print(f"mode={mesh.mode} F={mesh.n_faces} E={mesh.n_edges} V={mesh.n_verts}")
    if colors is None:
        print("coloring: none")
        return 0
    used = sorted(set(colors))
    print(f"colors used: {' '.join(str(c) for c in used)}")
    print(f"orientable: {is_orientable(mesh, colors)}")
    indep = " ".join(
        f"{f}:{face_independence(mesh, colors, f)}" for f in range(mesh.n_faces))
    print(f"face independence: {indep}")
    zs = zero_sum_edges(mesh, colors)
    print(f"0-sum edges: {' '.join(str(e) for e in zs) if zs else '(none)'}")
    return 0


def cmd_enumerate(args) -> int:
    mesh, _ = _load(args.file)
    census = enumerate_colorings(mesh)
    print(f"raw={census.raw} dj={census.dj_count} full={census.full_count}")
    for rep in census.full_classes:
        print("full", " ".join(str(c) for c in rep))
    return 0


def cmd_canon(args) -> int:
    mesh, colors = _load(args.file)
    if colors is None:
        print(code_hex(canonical_code(mesh)))
    else:
        print(code_hex(canonical_code_colored(mesh, colors, args.relation)))
    return 0


def cmd_apply(args) -> int:
    cp = _load_colored(args.file)
    cp = basics.canonical_cp(cp)
    script = Path(args.script).read_text()
    for lineno, raw in enumerate(script.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            move = reducer.parse_move_line(line)
        except ValueError as exc:
            raise DomainError(f"{args.script}:{lineno}: {exc}") from exc
        children = [cp]
        partner = None
        for k, v in move.params:
            if k == "basic":
                partner = v
        if partner is not None:
            move = moves.Move(move.tag,
                              tuple((k, v) for k, v in move.params if k != "basic"))
            children.append(basics.basic_rep(partner, cp.mode))
        try:
            cp = moves.apply_move(move, children)
        except moves.MoveError as exc:
            raise DomainError(f"{args.script}:{lineno}: {exc}") from exc
        cp = basics.canonical_cp(cp)
    print(code_hex(canonical_code_colored(cp.mesh, cp.colors)))
    if args.out:
        Path(args.out).write_text(to_scp(cp.mesh, cp.colors))
    return 0


def cmd_reduce(args) -> int:
    cp = _load_colored(args.file)
    try:
        tree = reducer.reduce(cp, args.strategy, seed=args.seed)
    except (reducer.TheoremViolation, ValueError) as exc:
        raise DomainError(str(exc)) from exc
    print(f"leaves: {' '.join(tree.leaves())}")
    print(f"moves: {' '.join(tree.move_tags()) or '(none)'}")
    print(f"target: {code_hex(tree.root.code)}")
    if args.out:
        Path(args.out).write_text(reducer.tree_to_text(tree))
    return 0


def cmd_replay(args) -> int:
    text = Path(args.file).read_text()
    try:
        tree = reducer.tree_from_text(text)
        cp = reducer.replay(tree)
    except (reducer.ReplayError, moves.MoveError) as exc:
        raise DomainError(str(exc)) from exc
    print(code_hex(canonical_code_colored(cp.mesh, cp.colors)))
    if args.out:
        Path(args.out).write_text(to_scp(cp.mesh, cp.colors))
    return 0


def _independence_profile(cp: ColoredPolytope) -> str:
    counts: dict[int, int] = {}
    for f in range(cp.mesh.n_faces):
        j = face_independence(cp.mesh, cp.colors, f)
        counts[j] = counts.get(j, 0) + 1
    return ",".join(f"{j}:{counts[j]}" for j in sorted(counts))


def cmd_census(args) -> int:
    try:
        census = corpus.colored_census(args.max_faces, args.mode)
    except corpus.CensusError as exc:
        raise DomainError(str(exc)) from exc
    rows = []
    for e in census.entries:
        used = "+".join(str(c) for c in sorted(set(e.cp.colors)))
        rows.append("\t".join([
            code_hex(e.code), str(e.cp.mesh.n_faces), used,
            str(is_orientable(e.cp.mesh, e.cp.colors)).lower(),
            _independence_profile(e.cp)]))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for e in census.entries:
            name = code_hex(e.code)[:40]
            (out_dir / f"{name}.scp").write_text(to_scp(e.cp.mesh, e.cp.colors))
        (out_dir / "census.tsv").write_text(
            "\n".join(["code\tfaces\tcolors\torientable\tindependence", *rows]) + "\n")
    print(f"meshes: {len(census.meshes)}  colored classes: {len(census.entries)}")
    for row in rows if not args.out else []:
        print(row)
    return 0


def cmd_walk(args) -> int:
    move_set = tuple(args.moves.split(",")) if args.moves else ("blow_up", "dehn")
    try:
        cp, tree = corpus.random_walk(args.seed, args.steps, move_set, args.mode)
    except corpus.CensusError as exc:
        raise DomainError(str(exc)) from exc
    print(f"faces: {cp.mesh.n_faces}")
    print(f"code: {code_hex(canonical_code_colored(cp.mesh, cp.colors))}")
    print(f"leaves: {' '.join(tree.leaves())}")
    if args.out:
        Path(args.out).write_text(reducer.tree_to_text(tree))
    return 0


def cmd_gap_search(args) -> int:
    for max_f in range(7, args.max_faces + 1):
        census = corpus.colored_census(max_f)
        stream = [e.cp for e in census.entries if e.cp.mesh.n_faces == max_f]
        witness = reducer.find_lemma_gap_witness(stream)
        if witness is not None:
            print(f"witness found at F={witness.cp.mesh.n_faces}, edge {witness.edge}")
            qd = moves.quasi_decompose(witness.cp)
            print(f"quasi-decomposable: {qd.kind if qd else 'NO'}")
            if args.out:
                Path(args.out).write_text(
                    to_scp(witness.cp.mesh, witness.cp.colors,
                           comment=f"gap witness; blocked surgery edge {witness.edge}"))
            return 0
    print(f"no witness up to F={args.max_faces}; bound reached")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smallcover",
        description="surgery calculus for GF(2)^3-colored 3-valent sphere meshes")
    sub = p.add_subparsers(dest="cmd", required=True)

    def scp_cmd(name, fn, **kw):
        sp = sub.add_parser(name, **kw)
        sp.add_argument("file", help="SCP mesh file")
        sp.set_defaults(fn=fn)
        return sp

    scp_cmd("validate", cmd_validate, help="structural and coloring checks")
    scp_cmd("info", cmd_info, help="counts, colors, orientability, profiles")
    scp_cmd("enumerate", cmd_enumerate, help="coloring census of the mesh")
    sp = scp_cmd("canon", cmd_canon, help="canonical code")
    sp.add_argument("--relation", choices=["full", "dj"], default="full")

    sp = scp_cmd("apply", cmd_apply, help="apply a move script")
    sp.add_argument("script", help="move script, one move per line")
    sp.add_argument("--out", help="write the resulting SCP here")

    sp = scp_cmd("reduce", cmd_reduce, help="decompose into basic pieces")
    sp.add_argument("--strategy", choices=list(reducer.STRATEGIES),
                    default=reducer.GENERAL_4_8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write the construction trace here")

    sp = sub.add_parser("replay", help="rebuild a construction trace")
    sp.add_argument("file", help="SCT trace file")
    sp.add_argument("--out", help="write the resulting SCP here")
    sp.set_defaults(fn=cmd_replay)

    sp = sub.add_parser("census", help="colored census at desk scale")
    sp.add_argument("--max-faces", type=int, default=8)
    sp.add_argument("--mode", choices=["strict", "relaxed"], default="strict")
    sp.add_argument("--jobs", type=int, default=1,
                    help="accepted for interface stability; generation is "
                         "deterministic regardless")
    sp.add_argument("--out", help="directory for SCP files and census.tsv")
    sp.set_defaults(fn=cmd_census)

    sp = sub.add_parser("walk", help="random construction with ground truth")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", type=int, default=5)
    sp.add_argument("--moves", help="comma list from: " + ",".join(corpus.WALK_MOVES))
    sp.add_argument("--mode", choices=["strict", "relaxed"], default="strict")
    sp.add_argument("--out", help="write the ground-truth trace here")
    sp.set_defaults(fn=cmd_walk)

    sp = sub.add_parser("gap-search", help="search for the lemma-gap witness")
    sp.add_argument("--max-faces", type=int, default=10)
    sp.add_argument("--out", help="write the witness SCP here")
    sp.set_defaults(fn=cmd_gap_search)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MeshError, ColoringError, moves.MoveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
