"""Censuses and random walks at desk scale.

The mesh census closes the simplex (strict) or theta decomposition (relaxed)
under uncolored vertex truncation, uncolored pinching and vertex sums,
deduplicating by canonical code.  Completeness of the strict census is
cross-checked against an independent enumeration of simplicial sphere
triangulations by vertex splitting (the duals of the cubic meshes), a
different move system.

The colored census pairs every mesh with its full-equivalence coloring
classes.  Random walks build colored meshes with known ground-truth
construction trees.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from . import basics, gf2, moves, reducer
from .canon import (canonical_code, canonical_code_colored, canonical_colored_form,
                    canonical_mesh_form)
from .coloring import ColoredPolytope, enumerate_colorings
from .mesh import RELAXED, STRICT, MeshError, SphereMesh, simplex, theta

DEFAULT_MAX_FACES = 12


class CensusError(ValueError):
    pass


def census_meshes(max_faces: int, mode: str = STRICT,
                  limit: int = DEFAULT_MAX_FACES + 2) -> list[SphereMesh]:
    """All 3-valent spheres of the given mode with F <= max_faces, up to
    uncolored equivalence, in canonical-code order (canonical presentations)."""
    if max_faces > limit:
        raise CensusError(f"max_faces {max_faces} exceeds the limit {limit}")
    seed_mesh = simplex() if mode == STRICT else theta()
    if mode == RELAXED:
        seed_mesh = SphereMesh(seed_mesh.opp, seed_mesh.nxt, RELAXED)
    start, _ = canonical_mesh_form(seed_mesh)
    seen: dict[bytes, SphereMesh] = {canonical_code(start): start}
    frontier = [start]
    while frontier:
        fresh: list[SphereMesh] = []
        for m in frontier:
            for cand in _expansions(m, max_faces):
                code = canonical_code(cand)
                if code in seen:
                    continue
                canon_m, _ = canonical_mesh_form(cand)
                seen[code] = canon_m
                fresh.append(canon_m)
        # vertex sums of pairs discovered so far
        pool = list(seen.values())
        for a in fresh:
            for b in pool:
                if a.n_faces + b.n_faces - 3 > max_faces:
                    continue
                for cand in _sum_expansions(a, b):
                    code = canonical_code(cand)
                    if code not in seen:
                        canon_m, _ = canonical_mesh_form(cand)
                        seen[code] = canon_m
                        fresh.append(canon_m)
        frontier = fresh
    return [seen[c] for c in sorted(seen)]


def _expansions(m: SphereMesh, max_faces: int) -> Iterator[SphereMesh]:
    if m.n_faces + 1 <= max_faces:
        for v in range(m.n_verts):
            new_mesh, _, _ = moves.blow_up_mesh(m, v)
            if new_mesh.validate().ok:
                yield new_mesh
        for w in range(m.n_faces):
            w_edges = m.face_edges(w)
            for i, x in enumerate(w_edges):
                for y in w_edges[i + 1:]:
                    if m.mode == STRICT and m.edges_adjacent(x, y):
                        continue
                    g1 = _across(m, w, x)
                    g3 = _across(m, w, y)
                    if g1 == g3:
                        continue
                    if m.mode == STRICT and m.faces_adjacent(g1, g3):
                        continue
                    try:
                        new_mesh, _, _ = moves.inverse_surgery_mesh(m, w, x, y)
                    except MeshError:
                        continue
                    if new_mesh.validate().ok:
                        yield new_mesh
    # uncolored face-count-preserving Dehn move (bistellar 1-move); without it
    # the triangle-free meshes (cube and beyond) are unreachable
    for e in range(m.n_edges):
        for end in (0, 1):
            cand = _dehn_mesh(m, e, end)
            if cand is not None and cand.validate().ok:
                yield cand


def _dehn_mesh(m: SphereMesh, e: int, end: int) -> SphereMesh | None:
    f1, f3 = m.edge_faces(e)
    if m.face_degree(f1) < 4 or m.face_degree(f3) < 4:
        return None
    p = m.edges[e][end]
    try:
        mid, dmap, _ = moves.blow_up_mesh(m, m.vert_of[p])
        new_mesh, _ = moves.surgery_mesh(mid, mid.edge_of[dmap[p]])
    except MeshError:
        return None
    return new_mesh


def _across(m: SphereMesh, w: int, e: int) -> int:
    d, d2 = m.edges[e]
    return m.face_of[d2] if m.face_of[d] == w else m.face_of[d]


def _sum_expansions(a: SphereMesh, b: SphereMesh) -> Iterator[SphereMesh]:
    for va in range(a.n_verts):
        for vb in range(b.n_verts):
            for dart_b in b.verts[vb]:
                try:
                    new_mesh, _, _ = moves.connected_sum_mesh(
                        a, b, a.verts[va][0], dart_b)
                except MeshError:
                    continue
                if new_mesh.validate().ok:
                    yield new_mesh


@dataclass(frozen=True)
class CensusEntry:
    code: bytes
    cp: ColoredPolytope        # canonical presentation
    mesh_index: int            # index of the carrier in the mesh census


@dataclass(frozen=True)
class Census:
    max_faces: int
    mode: str
    meshes: tuple[SphereMesh, ...]
    entries: tuple[CensusEntry, ...]


def colored_census(max_faces: int, mode: str = STRICT,
                   limit: int = DEFAULT_MAX_FACES + 2) -> Census:
    """Every full-equivalence class of colored mesh with F <= max_faces."""
    meshes = census_meshes(max_faces, mode, limit)
    entries: list[CensusEntry] = []
    for idx, m in enumerate(meshes):
        for rep in enumerate_colorings(m).full_classes:
            mesh2, colors2, _, _ = canonical_colored_form(m, rep)
            cp = ColoredPolytope(mesh2, colors2)
            entries.append(CensusEntry(
                canonical_code_colored(mesh2, colors2), cp, idx))
    entries.sort(key=lambda e: e.code)
    return Census(max_faces, mode, tuple(meshes), tuple(entries))


# -- independent triangulation oracle -----------------------------------------


def _tetra_triangulation() -> SphereMesh:
    # the tetrahedron as a simplicial sphere (vertices of degree 3)
    return simplex()


def _triangulation_valid(m: SphereMesh) -> bool:
    if any(len(f) != 3 for f in m.faces):
        return False
    if m.n_verts - m.n_edges + m.n_faces != 2:
        return False
    seen = set()
    for e in range(m.n_edges):
        u, w = m.edge_verts(e)
        if u == w or (u, w) in seen or (w, u) in seen:
            return False
        seen.add((u, w))
    return True


def _vertex_split(m: SphereMesh, v: int, a: int, b: int) -> SphereMesh:
    """Split vertex v of a triangulation between link positions a and b."""
    darts = m.verts[v]
    k = len(darts)
    if a == b:
        raise MeshError("split positions coincide")
    d_seq = [darts[(a + t) % k] for t in range(k)]  # starts at d_a
    cut = (b - a) % k
    v1_old = d_seq[:cut + 1]          # d_a .. d_b
    v2_old = d_seq[cut + 1:]          # d_{b+1} .. d_{a-1}
    d_a, d_b = d_seq[0], d_seq[cut]
    n = m.n_darts
    m1, m2 = n, n + 1
    na, na_op = n + 2, n + 3          # v2 -> u_a and back
    nb, nb_op = n + 4, n + 5          # v2 -> u_b and back
    opp = list(m.opp) + [m2, m1, na_op, na, nb_op, nb]
    nxt = list(m.nxt) + [0] * 6
    # v1 cycle: m1, d_a ... d_b
    cyc1 = [m1, *v1_old]
    for i, d in enumerate(cyc1):
        nxt[d] = cyc1[(i + 1) % len(cyc1)]
    # v2 cycle: m2, nb, d_{b+1} ... d_{a-1}, na
    cyc2 = [m2, nb, *v2_old, na]
    for i, d in enumerate(cyc2):
        nxt[d] = cyc2[(i + 1) % len(cyc2)]
    # u_a: sigma(alpha d_a) = alpha n_a, sigma(alpha n_a) = old sigma(alpha d_a)
    ada = m.opp[d_a]
    nxt[na_op] = m.nxt[ada]
    nxt[ada] = na_op
    # u_b: sigma(alpha n_b) = alpha d_b, predecessor of alpha d_b moves to alpha n_b
    adb = m.opp[d_b]
    prev = next(x for x in m.verts[m.vert_of[adb]] if m.nxt[x] == adb)
    nxt[nb_op] = adb
    nxt[prev] = nb_op
    return SphereMesh(opp, nxt, m.mode)


def triangulation_counts(max_vertices: int) -> dict[int, int]:
    """Simplicial triangulations of the sphere by vertex count, enumerated by
    vertex splitting from the tetrahedron.  The duals are the strict census
    meshes, with triangulation vertices matching mesh faces."""
    start = _tetra_triangulation()
    assert _triangulation_valid(start)
    seen: dict[bytes, SphereMesh] = {canonical_code(start): start}
    frontier = [start]
    while frontier:
        fresh = []
        for m in frontier:
            if m.n_verts + 1 > max_vertices:
                continue
            for v in range(m.n_verts):
                k = len(m.verts[v])
                for a in range(k):
                    for b in range(k):
                        if a == b:
                            continue
                        try:
                            cand = _vertex_split(m, v, a, b)
                        except MeshError:
                            continue
                        if not _triangulation_valid(cand):
                            continue
                        code = canonical_code(cand)
                        if code not in seen:
                            seen[code] = cand
                            fresh.append(cand)
        frontier = fresh
    counts: dict[int, int] = {}
    for m in seen.values():
        counts[m.n_verts] = counts.get(m.n_verts, 0) + 1
    return counts


# -- random walks --------------------------------------------------------------


WALK_MOVES = ("blow_up", "dehn", "surgery", "inverse_surgery", "conn_sum_basic",
              "edge_sum_basic", "recolor")


def random_walk(seed: int, steps: int, move_set: Sequence[str] = ("blow_up", "dehn"),
                mode: str = STRICT) -> tuple[ColoredPolytope, reducer.ConstructionTree]:
    """Random construction from a random basic piece; returns the result in
    canonical presentation together with its ground-truth tree."""
    for name in move_set:
        if name not in WALK_MOVES:
            raise CensusError(f"unknown walk move {name!r}")
    rng = random.Random(seed)
    names = list(basics.STRICT_BASICS) if mode == STRICT else \
        list(basics.STRICT_BASICS) + list(basics.RELAXED_EXTRAS)
    name = rng.choice(names)
    cp = basics.basic_rep(name, mode)
    node = reducer.TreeNode(None, name, (),
                            canonical_code_colored(cp.mesh, cp.colors))
    remaining = steps
    stall = 0
    while remaining > 0 and stall < 40:
        kind = rng.choice(list(move_set))
        got = _walk_step(rng, cp, node, kind, mode)
        if got is None:
            stall += 1
            continue
        cp, node = got
        stall = 0
        remaining -= 1
    return cp, reducer.ConstructionTree(node, mode, reducer.GENERAL_4_8)


def _walk_step(rng: random.Random, cp: ColoredPolytope, node: reducer.TreeNode,
               kind: str, mode: str):
    mesh = cp.mesh
    code_before = canonical_code_colored(mesh, cp.colors)
    if kind == "blow_up":
        v = rng.randrange(mesh.n_verts)
        move = moves.Move.make(moves.BLOW_UP, vertex=v)
        children = [cp]
        kids = (node,)
    elif kind == "dehn":
        sites = [e for e in range(mesh.n_edges) if moves.dehn_legality(cp, e).legal]
        if not sites:
            return None
        move = moves.Move.make(moves.DEHN, edge=rng.choice(sites), end=0)
        children = [cp]
        kids = (node,)
    elif kind == "surgery":
        sites = [e for e in range(mesh.n_edges) if moves.surgery_legality(cp, e).legal]
        if not sites:
            return None
        move = moves.Move.make(moves.SURGERY, edge=rng.choice(sites))
        children = [cp]
        kids = (node,)
    elif kind == "inverse_surgery":
        sites = []
        for w in range(mesh.n_faces):
            es = mesh.face_edges(w)
            for i, x in enumerate(es):
                for y in es[i + 1:]:
                    if moves.inverse_surgery_legality(cp, w, x, y).legal:
                        sites.append((w, x, y))
        if not sites:
            return None
        w, x, y = rng.choice(sites)
        move = moves.Move.make(moves.INVERSE_SURGERY, face=w, e1=x, e3=y)
        children = [cp]
        kids = (node,)
    elif kind == "recolor":
        sites = []
        for f in range(mesh.n_faces):
            nb = {cp.colors[g] for g in mesh.face_neighbors(f)}
            if gf2.rank(nb) == 2:
                for w_off in sorted(gf2.span(nb) - {0}):
                    sites.append((f, w_off))
        if not sites:
            return None
        f, w_off = rng.choice(sites)
        move = moves.Move.make(moves.RECOLOR, face=f, w=w_off)
        children = [cp]
        kids = (node,)
    else:  # conn_sum_basic / edge_sum_basic
        names = list(basics.STRICT_BASICS) if mode == STRICT else \
            list(basics.STRICT_BASICS) + [basics.P32_L1, basics.P32_L2]
        other = basics.basic_rep(rng.choice(names), mode)
        leaf = reducer.TreeNode(None, basics.identify_basic(other), (),
                                canonical_code_colored(other.mesh, other.colors))
        if kind == "conn_sum_basic":
            va = rng.randrange(mesh.n_verts)
            vb = rng.randrange(other.mesh.n_verts)
            gl = moves.connected_sum_gluings(cp, other, va, vb)
            if not gl:
                return None
            dart_a, dart_b, theta = rng.choice(gl)
            move = moves.Move.make(moves.CONN_SUM, dart_a=dart_a, dart_b=dart_b,
                                   theta=(theta[1], theta[2], theta[4]))
        else:
            ea = rng.randrange(mesh.n_edges)
            eb = rng.randrange(other.mesh.n_edges)
            gl = moves.edge_sum_gluings(cp, other, ea, eb)
            if not gl:
                return None
            dart_a, dart_b, theta = rng.choice(gl)
            move = moves.Move.make(moves.EDGE_SUM, dart_a=dart_a, dart_b=dart_b,
                                   theta=(theta[1], theta[2], theta[4]))
        children = [cp, other]
        kids = (node, leaf)
    try:
        nxt_cp = moves.apply_move(move, children)
    except moves.MoveError:
        return None
    mesh2, colors2, _, _ = canonical_colored_form(nxt_cp.mesh, nxt_cp.colors)
    star = ColoredPolytope(mesh2, colors2)
    new_node = reducer.TreeNode(move, None, kids,
                                canonical_code_colored(mesh2, colors2))
    return star, new_node
