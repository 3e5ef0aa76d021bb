"""Face colorings by nonzero elements of (Z_2)^3 and their predicates.

A coloring is valid when at every vertex the three incident face colors are
linearly independent.  Enumeration counts all valid colorings, their
GL(3,Z_2)-orbits (D-J classes) and the orbits under GL x mesh automorphisms
(full classes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import canon, gf2
from .mesh import SphereMesh

ENUMERATION_FACE_LIMIT = 16


class ColoringError(ValueError):
    pass


@dataclass(frozen=True)
class ColoredPolytope:
    mesh: SphereMesh
    colors: tuple[int, ...]

    def __post_init__(self):
        if len(self.colors) != self.mesh.n_faces:
            raise ColoringError(
                f"{len(self.colors)} colors for {self.mesh.n_faces} faces")

    @property
    def mode(self) -> str:
        return self.mesh.mode

    def code(self, relation: str = canon.FULL) -> bytes:
        return canon.canonical_code_colored(self.mesh, self.colors, relation)

    def distinct_colors(self) -> frozenset[int]:
        return frozenset(self.colors)

    def __repr__(self) -> str:
        return f"ColoredPolytope(F={self.mesh.n_faces}, colors={self.colors})"


def validate_coloring(mesh: SphereMesh, colors: Sequence[int]) -> int | None:
    """None when condition (*) holds everywhere, else a witness vertex id."""
    if len(colors) != mesh.n_faces:
        raise ColoringError(f"{len(colors)} colors for {mesh.n_faces} faces")
    if any(not 1 <= c <= 7 for c in colors):
        raise ColoringError("colors must lie in 1..7")
    face_of = mesh.face_of
    for v, darts in enumerate(mesh.verts):
        a, b, c = (colors[face_of[d]] for d in darts)
        if not gf2.independent3(a, b, c):
            return v
    return None


def check_coloring(cp: ColoredPolytope) -> None:
    v = validate_coloring(cp.mesh, cp.colors)
    if v is not None:
        raise ColoringError(f"condition violated at vertex {v}")


def face_independence(mesh: SphereMesh, colors: Sequence[int], face: int) -> int:
    """Rank (2 or 3) of the colors adjacent to `face`."""
    if not 0 <= face < mesh.n_faces:
        raise ColoringError(f"unknown face {face}")
    return gf2.rank({colors[g] for g in mesh.face_neighbors(face)})


@dataclass(frozen=True)
class EdgeProfile:
    distinct_colors: int
    zero_sum: bool
    distinct_cells: int  # < 4 only in relaxed mode (repeated surrounding face)


def edge_profile(mesh: SphereMesh, colors: Sequence[int], edge: int) -> EdgeProfile:
    """Colors around an edge: two containing faces plus the two end faces."""
    if not 0 <= edge < mesh.n_edges:
        raise ColoringError(f"unknown edge {edge}")
    f1, f3 = mesh.edge_faces(edge)
    f2, f4 = mesh.edge_end_faces(edge)
    cells = (f1, f2, f3, f4)
    cs = [colors[f] for f in cells]
    return EdgeProfile(
        distinct_colors=len(set(cs)),
        zero_sum=(cs[0] ^ cs[1] ^ cs[2] ^ cs[3]) == 0,
        distinct_cells=len(set(cells)),
    )


def zero_sum_edges(mesh: SphereMesh, colors: Sequence[int]) -> tuple[int, ...]:
    return tuple(e for e in range(mesh.n_edges)
                 if edge_profile(mesh, colors, e).zero_sum)


def is_orientable(mesh: SphereMesh, colors: Sequence[int]) -> bool:
    """Image contained in {a, b, c, a+b+c} for some basis.

    Equivalent finite criterion: at most 4 distinct colors and every triple
    of distinct used colors has rank 3 (a compatible 4th color is forced to
    be the sum of an independent triple).
    """
    used = sorted(set(colors))
    if len(used) > 4:
        return False
    k = len(used)
    for i in range(k):
        for j in range(i + 1, k):
            for l in range(j + 1, k):
                if not gf2.independent3(used[i], used[j], used[l]):
                    return False
    return True


# -- enumeration -------------------------------------------------------------


@dataclass(frozen=True)
class ColoringCensus:
    raw: int
    dj_classes: tuple[tuple[int, ...], ...]
    full_classes: tuple[tuple[int, ...], ...]

    @property
    def dj_count(self) -> int:
        return len(self.dj_classes)

    @property
    def full_count(self) -> int:
        return len(self.full_classes)


def enumerate_colorings(mesh: SphereMesh, limit: int = ENUMERATION_FACE_LIMIT) -> ColoringCensus:
    """All valid colorings of a mesh, up to nothing / GL / GL x automorphisms.

    GL(3,Z_2) acts freely on valid colorings (the used colors always span),
    so raw = 168 * dj and the D-J representatives are exactly the colorings
    with the three faces at vertex 0 colored (1, 2, 4).
    """
    if mesh.n_faces > limit:
        raise ColoringError(
            f"{mesh.n_faces} faces exceeds enumeration limit {limit}")
    face_of = mesh.face_of
    root = mesh.verts[0]
    root_faces = [face_of[d] for d in root]
    if len(set(root_faces)) != 3:
        return ColoringCensus(0, (), ())

    # constraints: per face, the vertices it participates in (as face triples)
    vert_faces = [tuple(face_of[d] for d in orbit) for orbit in mesh.verts]

    order = _assignment_order(mesh, root_faces)
    position = {f: i for i, f in enumerate(order)}
    # for each face, the vertex triples completed when it is assigned
    checks: list[list[tuple[int, int]]] = [[] for _ in order]
    for triple in vert_faces:
        last = max(triple, key=lambda f: position[f])
        others = [f for f in triple if f != last]
        if len(others) == 1:  # repeated face at a vertex: never satisfiable
            checks[position[last]].append((others[0], others[0]))
        else:
            checks[position[last]].append((others[0], others[1]))

    colors = [0] * mesh.n_faces
    for f, c in zip(root_faces, gf2.BASIS):
        colors[f] = c
    reps: list[tuple[int, ...]] = []

    def extend(i: int) -> None:
        if i == len(order):
            reps.append(tuple(colors))
            return
        f = order[i]
        if colors[f]:  # a root face: only verify its checks
            if all(gf2.independent3(colors[a], colors[b], colors[f])
                   for a, b in checks[i]):
                extend(i + 1)
            return
        for c in gf2.NONZERO:
            ok = True
            for a, b in checks[i]:
                if not gf2.independent3(colors[a], colors[b], c):
                    ok = False
                    break
            if ok:
                colors[f] = c
                extend(i + 1)
        colors[f] = 0

    extend(0)

    dj = sorted(reps)
    by_full: dict[bytes, tuple[int, ...]] = {}
    for rep in dj:
        code = canon.canonical_code_colored(mesh, rep, canon.FULL)
        if code not in by_full or rep < by_full[code]:
            by_full[code] = rep
    full = tuple(sorted(by_full.values()))
    return ColoringCensus(len(gf2.GL3) * len(dj), tuple(dj), full)


def _assignment_order(mesh: SphereMesh, root_faces: list[int]) -> list[int]:
    """Root faces first, then BFS by face adjacency (keeps pruning tight)."""
    order = list(root_faces)
    seen = set(order)
    i = 0
    while i < len(order):
        for g in mesh.face_neighbors(order[i]):
            if g not in seen:
                seen.add(g)
                order.append(g)
        i += 1
    for f in range(mesh.n_faces):  # disconnected cannot happen, but stay total
        if f not in seen:
            order.append(f)
    return order
