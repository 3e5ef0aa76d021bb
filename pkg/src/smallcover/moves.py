"""The operation calculus on colored meshes.

Vertex connected sum, edge connected sum, surgery along an edge and its
inverse, the face-count-preserving Dehn surgery, vertex truncation (blow up)
and its inverse, polygon recoloring, the relaxed-mode bigon moves, and the
splitting operations that invert the sums.  Every operation checks its
legality first, performs a local dart rewrite, revalidates the result and
carries face colors across by surviving darts.

Conventions for an edge e with darts p, q = opp(p): F1 and F3 are the faces
through p and q; F2 and F4 are the third faces at org(p) and org(q).
Surgery along e deletes e and both endpoints, fuses the two F1-side edges
into one and the two F3-side edges into the other, and merges F2 with F4
(their colors must agree).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import gf2
from .canon import canonical_code_colored
from .coloring import ColoredPolytope, validate_coloring
from .mesh import STRICT, EdgeCut3, MeshError, SphereMesh

# legality failure reasons
QUAD_END_FACE = "QuadEndFace"
TRIANGLE_DEHN = "TriangleDehn"
ADJACENT_PAIR = "AdjacentPair"
SAME_FACE_DOUBLE_ADJACENCY = "SameFaceDoubleAdjacency"
FACES_ALREADY_ADJACENT = "FacesAlreadyAdjacent"
COLOR_MISMATCH = "ColorMismatch"
NOT_ZERO_SUM = "NotZeroSum"
CONNECTIVITY_BREAK = "ConnectivityBreak"

CONN_SUM = "ConnSum"
SPLIT_VERTEX_SUM = "SplitVertexSum"
SURGERY = "Surgery"
INVERSE_SURGERY = "InverseSurgery"
EDGE_SUM = "EdgeSum"
SPLIT_EDGE_SUM = "SplitEdgeSum"
DEHN = "Dehn"
BLOW_UP = "BlowUp"
BLOW_DOWN = "BlowDown"
RECOLOR = "Recolor"
RELAXED_BLOW_UP_P2 = "RelaxedBlowUpP2"
BIGON_BLOW_DOWN = "BigonBlowDown"


class MoveError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class ExcludedDehnCase(MoveError):
    """Edge-sum split whose glued part is the simplex (that is Dehn surgery)."""

    def __init__(self, detail: str = ""):
        super().__init__("ExcludedDehnCase", detail)


@dataclass(frozen=True)
class Legality:
    legal: bool
    reason: str | None = None

    def require(self) -> None:
        if not self.legal:
            raise MoveError(self.reason or "illegal")


LEGAL = Legality(True)


@dataclass(frozen=True)
class Move:
    """One operation instance; entity parameters are canonical labels.

    Canonical labels are plain entity ids of the canonical presentation of
    the mesh(es) the move applies to (see canon.canonical_colored_form).
    """
    tag: str
    params: tuple[tuple[str, object], ...]

    def get(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    @staticmethod
    def make(tag: str, **params) -> "Move":
        return Move(tag, tuple(sorted(params.items())))


# -- rewrite scratchpad ------------------------------------------------------


class _Rw:
    """Accumulates a local rewrite over one or two source meshes.

    Darts are keyed (source_index, dart) for survivors and ('n', i) for new
    darts; opp/nxt default to the source arrays and may be overridden.
    """

    def __init__(self, *meshes: SphereMesh):
        self.meshes = meshes
        self.dead: list[set[int]] = [set() for _ in meshes]
        self.keep: list[set[int] | None] = [None for _ in meshes]
        self.opp_over: dict = {}
        self.nxt_over: dict = {}
        self.n_new = 0

    def new_dart(self):
        self.n_new += 1
        return ("n", self.n_new - 1)

    def kill(self, src: int, *darts: int) -> None:
        self.dead[src].update(darts)

    def restrict(self, src: int, keep: set[int]) -> None:
        self.keep[src] = keep

    def set_opp(self, a, b) -> None:
        self.opp_over[a] = b
        self.opp_over[b] = a

    def set_nxt(self, a, b) -> None:
        self.nxt_over[a] = b

    def build(self, mode: str) -> tuple[SphereMesh, list[dict[int, int]], dict]:
        final = []
        for s, mesh in enumerate(self.meshes):
            pool = range(mesh.n_darts) if self.keep[s] is None else sorted(self.keep[s])
            final.extend((s, d) for d in pool if d not in self.dead[s])
        final.extend(("n", i) for i in range(self.n_new))
        index = {key: i for i, key in enumerate(final)}
        opp = []
        nxt = []
        for key in final:
            o = self.opp_over.get(key)
            if o is None:
                s, d = key
                if s == "n":
                    raise MeshError(f"new dart {key} lacks opp")
                o = (s, self.meshes[s].opp[d])
            n = self.nxt_over.get(key)
            if n is None:
                s, d = key
                if s == "n":
                    raise MeshError(f"new dart {key} lacks nxt")
                n = (s, self.meshes[s].nxt[d])
            if o not in index or n not in index:
                raise MeshError(f"rewrite references dropped dart from {key}")
            opp.append(index[o])
            nxt.append(index[n])
        mesh = SphereMesh(opp, nxt, mode)
        maps: list[dict[int, int]] = []
        for s in range(len(self.meshes)):
            maps.append({d: index[(s, d)] for _, d in
                         ((s2, d2) for s2, d2 in final if s2 == s)})
        new_ids = {("n", i): index[("n", i)] for i in range(self.n_new)}
        return mesh, maps, new_ids


def _carry_colors(new_mesh: SphereMesh, rw_maps: list[dict[int, int]],
                  source_colors: list[Sequence[int]],
                  meshes: Sequence[SphereMesh],
                  extra: dict[int, int] | None = None) -> tuple[int, ...]:
    """Colors for the new mesh: each new face inherits from its surviving
    darts' source faces; disagreement is a color mismatch; faces with no
    source must appear in `extra` (new dart id -> color)."""
    back: dict[int, tuple[int, int]] = {}
    for s, m in enumerate(rw_maps):
        for old, new in m.items():
            back[new] = (s, old)
    colors = [-1] * new_mesh.n_faces
    for f in range(new_mesh.n_faces):
        claim = -1
        for d in new_mesh.faces[f]:
            src = back.get(d)
            if src is None:
                continue
            s, old = src
            c = source_colors[s][meshes[s].face_of[old]]
            if claim == -1:
                claim = c
            elif claim != c:
                raise MoveError(COLOR_MISMATCH,
                                f"face {f} inherits colors {claim} and {c}")
        colors[f] = claim
    if extra:
        for dart_new_id, c in extra.items():
            f = new_mesh.face_of[dart_new_id]
            if colors[f] == -1:
                colors[f] = c
    if -1 in colors:
        raise MoveError(COLOR_MISMATCH, "a new face received no color")
    return tuple(colors)


def _finish(cp_result: ColoredPolytope) -> ColoredPolytope:
    """Belt-and-braces: every move output must be a valid colored mesh."""
    report = cp_result.mesh.validate()
    if not report.ok:
        raise MoveError(CONNECTIVITY_BREAK,
                        "; ".join(i.check for i in report.failed()))
    v = validate_coloring(cp_result.mesh, cp_result.colors)
    if v is not None:
        raise MoveError(COLOR_MISMATCH, f"condition violated at vertex {v}")
    return cp_result


# -- blow up / blow down -----------------------------------------------------


def blow_up_mesh(mesh: SphereMesh, v: int) -> tuple[SphereMesh, dict[int, int], list[int]]:
    """Truncate vertex v into a triangle (uncolored).  Returns the mesh, the
    dart map, and the ids of the new triangle's inner darts."""
    if not 0 <= v < mesh.n_verts:
        raise MoveError("UnknownEntity", f"vertex {v}")
    d = mesh.verts[v]
    rw = _Rw(mesh)
    sp = [rw.new_dart() for _ in range(3)]  # s_i from v_i to v_{i+1}
    sm = [rw.new_dart() for _ in range(3)]
    for i in range(3):
        rw.set_opp(sp[i], sm[i])
        rw.set_nxt((0, d[i]), sp[i])
        rw.set_nxt(sp[i], sm[(i - 1) % 3])
        rw.set_nxt(sm[(i - 1) % 3], (0, d[i]))
    new_mesh, maps, new_ids = rw.build(mesh.mode)
    tri = [new_ids[k] for k in sm]
    return new_mesh, maps[0], tri


def blow_up(cp: ColoredPolytope, v: int) -> ColoredPolytope:
    """Connected sum with the simplex at a vertex; the new triangle's color
    is forced to the XOR of the three incident colors."""
    mesh, colors = cp.mesh, cp.colors
    a, b, c = (colors[f] for f in mesh.vertex_faces(v))
    new_mesh, dmap, tri = blow_up_mesh(mesh, v)
    out = _carry_colors(new_mesh, [dmap], [colors], [mesh], extra={tri[0]: a ^ b ^ c})
    return _finish(ColoredPolytope(new_mesh, out))


def blow_down_legality(cp: ColoredPolytope, face: int) -> Legality:
    mesh = cp.mesh
    if not 0 <= face < mesh.n_faces:
        return Legality(False, "UnknownEntity")
    if mesh.face_degree(face) != 3:
        return Legality(False, "NotATriangle")
    nb = mesh.face_neighbors(face)
    if len(set(nb)) != 3:
        return Legality(False, CONNECTIVITY_BREAK)
    if gf2.rank({cp.colors[g] for g in nb}) != 3:
        return Legality(False, COLOR_MISMATCH)
    return LEGAL


def blow_down(cp: ColoredPolytope, face: int) -> ColoredPolytope:
    """Contract a triangle back to a vertex (inverse of blow_up)."""
    blow_down_legality(cp, face).require()
    mesh = cp.mesh
    t = mesh.faces[face]
    rw = _Rw(mesh)
    z = [mesh.nxt[tk] for tk in t]
    for tk in t:
        rw.kill(0, tk, mesh.opp[tk])
    for k in range(3):
        rw.set_nxt((0, z[k]), (0, z[(k - 1) % 3]))
    new_mesh, maps, _ = rw.build(mesh.mode)
    out = _carry_colors(new_mesh, [maps[0]], [cp.colors], [mesh])
    return _finish(ColoredPolytope(new_mesh, out))


# -- surgery and inverse surgery ---------------------------------------------


def _edge_roles(mesh: SphereMesh, e: int) -> tuple[int, int, int, int, int, int]:
    """(p, q, F1, F3, F2, F4) for edge e."""
    p, q = mesh.edges[e]
    n = mesh.nxt
    return (p, q, mesh.face_of[p], mesh.face_of[q],
            mesh.face_of[n[n[p]]], mesh.face_of[n[n[q]]])


def surgery_legality(cp: ColoredPolytope, e: int, colored: bool = True) -> Legality:
    mesh = cp.mesh
    if not 0 <= e < mesh.n_edges:
        return Legality(False, "UnknownEntity")
    p, q, f1, f3, f2, f4 = _edge_roles(mesh, e)
    if colored and cp.colors[f2] != cp.colors[f4]:
        return Legality(False, COLOR_MISMATCH)
    if f2 == f4:
        return Legality(False, CONNECTIVITY_BREAK)
    lo = 5 if mesh.mode == STRICT else 4
    if mesh.face_degree(f1) < lo or mesh.face_degree(f3) < lo:
        return Legality(False, QUAD_END_FACE)
    nb2 = set(mesh.face_neighbors(f2))
    nb4 = set(mesh.face_neighbors(f4))
    if f4 in nb2 or f2 in nb4:
        return Legality(False, SAME_FACE_DOUBLE_ADJACENCY)
    if mesh.mode == STRICT and (nb2 & nb4) - {f1, f3}:
        return Legality(False, SAME_FACE_DOUBLE_ADJACENCY)
    return LEGAL


def surgery_mesh(mesh: SphereMesh, e: int) -> tuple[SphereMesh, dict[int, int]]:
    """The dart rewrite of surgery, without color bookkeeping."""
    p, q = mesh.edges[e]
    n, o = mesh.nxt, mesh.opp
    a1, a2 = n[p], n[n[p]]
    b1, b2 = n[q], n[n[q]]
    rw = _Rw(mesh)
    rw.kill(0, p, q, a1, a2, b1, b2)
    rw.set_opp((0, o[a2]), (0, o[b1]))
    rw.set_opp((0, o[a1]), (0, o[b2]))
    new_mesh, maps, _ = rw.build(mesh.mode)
    return new_mesh, maps[0]


def surgery(cp: ColoredPolytope, e: int) -> ColoredPolytope:
    surgery_legality(cp, e).require()
    new_mesh, dmap = surgery_mesh(cp.mesh, e)
    out = _carry_colors(new_mesh, [dmap], [cp.colors], [cp.mesh])
    return _finish(ColoredPolytope(new_mesh, out))


def surgery_breaks_connectivity(mesh: SphereMesh, e: int) -> bool:
    """Structural obstruction to surgery along a non-quadrilateral edge: the
    end faces share a neighbor besides the containing faces (or each other)."""
    _, _, f1, f3, f2, f4 = _edge_roles(mesh, e)
    if f2 == f4:
        return True
    nb2 = set(mesh.face_neighbors(f2))
    nb4 = set(mesh.face_neighbors(f4))
    return f4 in nb2 or bool((nb2 & nb4) - {f1, f3})


def inverse_surgery_legality(cp: ColoredPolytope, w: int, e1: int, e3: int,
                             allow_adjacent: bool | None = None) -> Legality:
    mesh = cp.mesh
    if not (0 <= w < mesh.n_faces and 0 <= e1 < mesh.n_edges and 0 <= e3 < mesh.n_edges):
        return Legality(False, "UnknownEntity")
    if e1 == e3:
        return Legality(False, ADJACENT_PAIR)
    w_edges = mesh.face_edges(w)
    if e1 not in w_edges or e3 not in w_edges:
        return Legality(False, "UnknownEntity")
    if allow_adjacent is None:
        allow_adjacent = mesh.mode != STRICT
    if not allow_adjacent and mesh.edges_adjacent(e1, e3):
        return Legality(False, ADJACENT_PAIR)
    g1 = _face_across(mesh, w, e1)
    g3 = _face_across(mesh, w, e3)
    if g1 == g3:
        return Legality(False, FACES_ALREADY_ADJACENT)
    if mesh.mode == STRICT and mesh.faces_adjacent(g1, g3):
        return Legality(False, FACES_ALREADY_ADJACENT)
    if gf2.rank({cp.colors[w], cp.colors[g1], cp.colors[g3]}) != 3:
        return Legality(False, COLOR_MISMATCH)
    return LEGAL


def _face_across(mesh: SphereMesh, w: int, e: int) -> int:
    d, d2 = mesh.edges[e]
    if mesh.face_of[d] == w:
        return mesh.face_of[d2]
    if mesh.face_of[d2] == w:
        return mesh.face_of[d]
    raise MoveError("UnknownEntity", f"edge {e} not on face {w}")


def _w_dart(mesh: SphereMesh, w: int, e: int) -> int:
    d, d2 = mesh.edges[e]
    return d if mesh.face_of[d] == w else d2


def inverse_surgery_mesh(mesh: SphereMesh, w: int, e1: int, e3: int
                         ) -> tuple[SphereMesh, dict[int, int], int]:
    """Pinch face w along a new edge meeting interior points of e1 and e3.

    Returns (mesh, dart map, new edge id).  w splits into two faces (the end
    faces of the new edge); the faces across e1 and e3 become its containing
    faces and gain two boundary edges each.
    """
    xw = _w_dart(mesh, w, e1)
    xg = mesh.opp[xw]
    yw = _w_dart(mesh, w, e3)
    yg = mesh.opp[yw]
    rw = _Rw(mesh)
    p, a1, a2 = rw.new_dart(), rw.new_dart(), rw.new_dart()
    q, b1, b2 = rw.new_dart(), rw.new_dart(), rw.new_dart()
    rw.set_opp(p, q)
    rw.set_opp(a2, (0, xg))
    rw.set_opp(b1, (0, xw))
    rw.set_opp(a1, (0, yw))
    rw.set_opp(b2, (0, yg))
    for u_cycle in ((p, a1, a2), (q, b1, b2)):
        for i, d in enumerate(u_cycle):
            rw.set_nxt(d, u_cycle[(i + 1) % 3])
    new_mesh, maps, new_ids = rw.build(mesh.mode)
    return new_mesh, maps[0], new_mesh.edge_of[new_ids[p]]


def inverse_surgery(cp: ColoredPolytope, w: int, e1: int, e3: int,
                    allow_adjacent: bool | None = None) -> ColoredPolytope:
    inverse_surgery_legality(cp, w, e1, e3, allow_adjacent).require()
    new_mesh, dmap, _ = inverse_surgery_mesh(cp.mesh, w, e1, e3)
    out = _carry_colors(new_mesh, [dmap], [cp.colors], [cp.mesh])
    return _finish(ColoredPolytope(new_mesh, out))


def relaxed_blow_up_p2(cp: ColoredPolytope, w: int, e1: int, e3: int) -> ColoredPolytope:
    """Inverse surgery along an adjacent edge pair; equals gluing the bigon
    prism (relaxed mode only)."""
    if cp.mesh.mode == STRICT:
        raise MoveError(ADJACENT_PAIR, "adjacent pair needs relaxed mode")
    if not cp.mesh.edges_adjacent(e1, e3):
        raise MoveError(ADJACENT_PAIR, "edges are not adjacent")
    return inverse_surgery(cp, w, e1, e3, allow_adjacent=True)


# -- reflection ---------------------------------------------------------------


def mirror_cp(cp: ColoredPolytope) -> ColoredPolytope:
    """The reflected colored mesh: rotations reversed, dart ids unchanged.

    The face through dart d of the mirror is the face through opp(d) of the
    original, which fixes the color transfer.
    """
    mesh = cp.mesh
    prev = [0] * mesh.n_darts
    for d in range(mesh.n_darts):
        prev[mesh.nxt[d]] = d
    new_mesh = SphereMesh(mesh.opp, prev, mesh.mode)
    colors = [0] * new_mesh.n_faces
    for f in range(new_mesh.n_faces):
        d = new_mesh.faces[f][0]
        colors[f] = cp.colors[mesh.face_of[mesh.opp[d]]]
    return ColoredPolytope(new_mesh, tuple(colors))


# -- connected sums ----------------------------------------------------------


def connected_sum_mesh(ma: SphereMesh, mb: SphereMesh, dart_a: int, dart_b: int
                       ) -> tuple[SphereMesh, dict[int, int], dict[int, int]]:
    """Glue at the origin vertices of dart_a and dart_b (uncolored rewrite).

    Stub k of A (counterclockwise from dart_a) joins stub k of B read
    clockwise from dart_b, the orientation-reversing pairing.
    """
    mode = ma.mode if ma.mode == mb.mode else "relaxed"
    da = [dart_a, ma.nxt[dart_a], ma.nxt[ma.nxt[dart_a]]]
    db = [dart_b, mb.nxt[mb.nxt[dart_b]], mb.nxt[dart_b]]  # sigma^-k for 3-valent
    rw = _Rw(ma, mb)
    rw.kill(0, *da)
    rw.kill(1, *db)
    for k in range(3):
        rw.set_opp((0, ma.opp[da[k]]), (1, mb.opp[db[k]]))
    new_mesh, maps, _ = rw.build(mode)
    return new_mesh, maps[0], maps[1]


def connected_sum(a: ColoredPolytope, b: ColoredPolytope, dart_a: int, dart_b: int,
                  theta: Sequence[int] | None = None) -> ColoredPolytope:
    """Vertex connected sum; theta recolors b before the paired faces merge."""
    theta = tuple(theta) if theta is not None else tuple(range(8))
    new_mesh, map_a, map_b = connected_sum_mesh(a.mesh, b.mesh, dart_a, dart_b)
    if new_mesh.n_faces != a.mesh.n_faces + b.mesh.n_faces - 3:
        raise MoveError(CONNECTIVITY_BREAK, "gluing did not merge three face pairs")
    colors_b = gf2.apply_theta(theta, b.colors)
    out = _carry_colors(new_mesh, [map_a, map_b], [a.colors, colors_b],
                        [a.mesh, b.mesh])
    return _finish(ColoredPolytope(new_mesh, out))


def conn_sum_merged_pairs(ma: SphereMesh, mb: SphereMesh, dart_a: int, dart_b: int
                          ) -> list[tuple[int, int]]:
    """Face pairs (of A, of B) merged by connected_sum at these darts."""
    da = [dart_a, ma.nxt[dart_a], ma.nxt[ma.nxt[dart_a]]]
    db = [dart_b, mb.nxt[mb.nxt[dart_b]], mb.nxt[dart_b]]
    return [(ma.face_of[ma.opp[da[k]]], mb.face_of[db[k]]) for k in range(3)]


def connected_sum_gluings(a: ColoredPolytope, b: ColoredPolytope, va: int, vb: int
                          ) -> list[tuple[int, int, tuple[int, ...]]]:
    """All legal (dart_a, dart_b, theta) at the given vertices; theta is the
    unique linear map matching the paired vertex color bases."""
    out = []
    dart_a = a.mesh.verts[va][0]
    for dart_b in b.mesh.verts[vb]:
        pairs = conn_sum_merged_pairs(a.mesh, b.mesh, dart_a, dart_b)
        theta = gf2.theta_mapping([b.colors[fb] for _, fb in pairs],
                                  [a.colors[fa] for fa, _ in pairs])
        if theta is None:
            continue
        try:
            connected_sum(a, b, dart_a, dart_b, theta)
        except MoveError:
            continue
        out.append((dart_a, dart_b, theta))
    return out


def edge_sum_mesh(ma: SphereMesh, mb: SphereMesh, dart_a: int, dart_b: int
                  ) -> tuple[SphereMesh, dict[int, int], dict[int, int]]:
    """Connected sum along the edges of dart_a and dart_b (uncolored).

    Equals surgery after the vertex sum at org(dart_a)/org(dart_b); both
    edges, all four endpoints and the eight corner darts disappear, and the
    eight boundary stubs are cross-fused.
    """
    mode = ma.mode if ma.mode == mb.mode else "relaxed"
    na, oa = ma.nxt, ma.opp
    nb, ob = mb.nxt, mb.opp
    pa, qa = dart_a, oa[dart_a]
    a1, a2 = na[pa], na[na[pa]]
    c1, c2 = na[qa], na[na[qa]]
    pb, qb = dart_b, ob[dart_b]
    a1b, a2b = nb[pb], nb[nb[pb]]
    c1b, c2b = nb[qb], nb[nb[qb]]
    rw = _Rw(ma, mb)
    rw.kill(0, pa, qa, a1, a2, c1, c2)
    rw.kill(1, pb, qb, a1b, a2b, c1b, c2b)
    rw.set_opp((0, oa[a1]), (1, ob[a2b]))
    rw.set_opp((0, oa[a2]), (1, ob[a1b]))
    rw.set_opp((0, oa[c2]), (1, ob[c1b]))
    rw.set_opp((0, oa[c1]), (1, ob[c2b]))
    new_mesh, maps, _ = rw.build(mode)
    return new_mesh, maps[0], maps[1]


def edge_sum(a: ColoredPolytope, b: ColoredPolytope, dart_a: int, dart_b: int,
             theta: Sequence[int] | None = None) -> ColoredPolytope:
    theta = tuple(theta) if theta is not None else tuple(range(8))
    new_mesh, map_a, map_b = edge_sum_mesh(a.mesh, b.mesh, dart_a, dart_b)
    if new_mesh.n_faces != a.mesh.n_faces + b.mesh.n_faces - 4:
        raise MoveError(CONNECTIVITY_BREAK, "gluing did not merge four face pairs")
    colors_b = gf2.apply_theta(theta, b.colors)
    out = _carry_colors(new_mesh, [map_a, map_b], [a.colors, colors_b],
                        [a.mesh, b.mesh])
    return _finish(ColoredPolytope(new_mesh, out))


def edge_sum_merged_pairs(ma: SphereMesh, mb: SphereMesh, dart_a: int, dart_b: int
                          ) -> list[tuple[int, int]]:
    """Face pairs merged by edge_sum: containing with containing, ends with
    ends (A1~B3, A3~B1, A2~B2, A4~B4 relative to the chosen darts)."""
    def roles(m: SphereMesh, p: int) -> tuple[int, int, int, int]:
        q = m.opp[p]
        return (m.face_of[p], m.face_of[q],
                m.face_of[m.nxt[m.nxt[p]]], m.face_of[m.nxt[m.nxt[q]]])

    a1, a3, a2, a4 = roles(ma, dart_a)
    b1, b3, b2, b4 = roles(mb, dart_b)
    return [(a1, b3), (a3, b1), (a2, b2), (a4, b4)]


def edge_sum_gluings(a: ColoredPolytope, b: ColoredPolytope, ea: int, eb: int
                     ) -> list[tuple[int, int, tuple[int, ...]]]:
    """All legal (dart_a, dart_b, theta) joining edges ea and eb; theta is
    pinned by three merged pairs and verified on the fourth."""
    out = []
    for dart_a in a.mesh.edges[ea]:
        for dart_b in b.mesh.edges[eb]:
            pairs = edge_sum_merged_pairs(a.mesh, b.mesh, dart_a, dart_b)
            theta = gf2.theta_mapping([b.colors[fb] for _, fb in pairs[:3]],
                                      [a.colors[fa] for fa, _ in pairs[:3]])
            if theta is None or theta[b.colors[pairs[3][1]]] != a.colors[pairs[3][0]]:
                continue
            try:
                edge_sum(a, b, dart_a, dart_b, theta)
            except MoveError:
                continue
            out.append((dart_a, dart_b, theta))
    return out


# -- Dehn surgery ------------------------------------------------------------


def dehn_legality(cp: ColoredPolytope, e: int) -> Legality:
    mesh = cp.mesh
    if not 0 <= e < mesh.n_edges:
        return Legality(False, "UnknownEntity")
    p, q, f1, f3, f2, f4 = _edge_roles(mesh, e)
    cs = cp.colors
    if cs[f1] ^ cs[f2] ^ cs[f3] ^ cs[f4] != 0:
        return Legality(False, NOT_ZERO_SUM)
    if mesh.mode == STRICT and (mesh.face_degree(f1) == 3 or mesh.face_degree(f3) == 3):
        return Legality(False, TRIANGLE_DEHN)
    if mesh.mode != STRICT and (mesh.face_degree(f1) < 3 or mesh.face_degree(f3) < 3):
        return Legality(False, QUAD_END_FACE)
    # the composite's surgery merges the new triangle with the far end face,
    # so the only connectivity bar is the two end faces being adjacent
    if mesh.mode == STRICT and f4 in mesh.face_neighbors(f2):
        return Legality(False, CONNECTIVITY_BREAK)
    return LEGAL


def dehn(cp: ColoredPolytope, e: int, end: int = 0) -> ColoredPolytope:
    """Edge sum with the simplex along a 0-sum edge: blow up one endpoint,
    then do surgery along the image of e.  Face count is preserved."""
    dehn_legality(cp, e).require()
    p = cp.mesh.edges[e][end]
    v = cp.mesh.vert_of[p]
    mid = blow_up(cp, v)
    _, dmap, _ = blow_up_mesh(cp.mesh, v)  # same deterministic rewrite
    e_img = mid.mesh.edge_of[dmap[p]]
    leg = surgery_legality(mid, e_img)
    if not leg.legal:
        reason = {COLOR_MISMATCH: NOT_ZERO_SUM, QUAD_END_FACE: TRIANGLE_DEHN}.get(
            leg.reason, CONNECTIVITY_BREAK)
        raise MoveError(reason, "surgery after blow up is illegal")
    return surgery(mid, e_img)


# -- recoloring --------------------------------------------------------------


def recolor_polygon(cp: ColoredPolytope, face: int, w: int) -> ColoredPolytope:
    """Coloring change of a 2-independent polygon by an element of its
    neighbors' span; an involution for fixed (face, w)."""
    mesh = cp.mesh
    if not 0 <= face < mesh.n_faces:
        raise MoveError("UnknownEntity", f"face {face}")
    nb_colors = {cp.colors[g] for g in mesh.face_neighbors(face)}
    if gf2.rank(nb_colors) != 2:
        raise MoveError(COLOR_MISMATCH, "face is not 2-independent")
    v2 = gf2.span(nb_colors)
    if w == 0 or w not in v2:
        raise MoveError(COLOR_MISMATCH, f"offset {w} outside the neighbor span")
    colors = list(cp.colors)
    colors[face] ^= w
    return _finish(ColoredPolytope(mesh, tuple(colors)))


# -- bigon moves (relaxed) ---------------------------------------------------


def bigon_blow_down(cp: ColoredPolytope, face: int) -> ColoredPolytope:
    """Contract a bigon: its two edges fuse and its vertices vanish."""
    mesh = cp.mesh
    if mesh.face_degree(face) != 2:
        raise MoveError("NotABigon", f"face {face}")
    x, y = mesh.faces[face]
    u, w = mesh.vert_of[x], mesh.vert_of[y]
    if u == w:
        raise MoveError(CONNECTIVITY_BREAK, "bigon with a single vertex")
    zu = next(d for d in mesh.verts[u] if mesh.edge_of[d] not in
              (mesh.edge_of[x], mesh.edge_of[y]))
    zw = next(d for d in mesh.verts[w] if mesh.edge_of[d] not in
              (mesh.edge_of[x], mesh.edge_of[y]))
    doomed = set(mesh.verts[u]) | set(mesh.verts[w])
    if mesh.opp[zu] in doomed or mesh.opp[zw] in doomed:
        raise MoveError(CONNECTIVITY_BREAK, "bigon stubs fold back")
    rw = _Rw(mesh)
    rw.kill(0, *doomed)
    rw.set_opp((0, mesh.opp[zu]), (0, mesh.opp[zw]))
    new_mesh, maps, _ = rw.build(mesh.mode)
    out = _carry_colors(new_mesh, [maps[0]], [cp.colors], [mesh])
    return _finish(ColoredPolytope(new_mesh, out))


# -- splits ------------------------------------------------------------------


def split_vertex_sum(cp: ColoredPolytope, cut: EdgeCut3
                     ) -> tuple[ColoredPolytope, ColoredPolytope,
                                tuple[tuple[int, ...], tuple[int, ...]]]:
    """Split along a rank-3 three-edge cut; each side closes with a vertex.

    Returns (A, B, (darts_a, darts_b)): the new-vertex darts of each part
    aligned with cut.edges; connected_sum(A, B, darts_a[k], darts_b[k])
    with identity theta restores the input.
    """
    mesh = cp.mesh
    belt_colors = {cp.colors[f] for f in cut.belt}
    if gf2.rank(belt_colors) != 3:
        raise MoveError(COLOR_MISMATCH,
                        "cut faces have rank < 3; this is an edge-sum seam")
    sides = _cut_sides(mesh, cut)
    parts = []
    for side_idx in (0, 1):
        keep_verts = sides[side_idx]
        s_darts = []
        for e in cut.edges:
            d, d2 = mesh.edges[e]
            s_darts.append(d if mesh.vert_of[d] in keep_verts else d2)
        # nu(i): the face through s_i returns to this side through s_nu(i)'s edge
        nu = {}
        for i, si in enumerate(s_darts):
            fs = mesh.face_of[si]
            for j, sj in enumerate(s_darts):
                if i != j and mesh.face_of[mesh.opp[sj]] == fs:
                    nu[i] = j
        if sorted(nu) != [0, 1, 2]:
            raise MoveError(CONNECTIVITY_BREAK, "cut belt is not a 3-cycle")
        rw = _Rw(mesh)
        rw.restrict(0, {d for d in range(mesh.n_darts)
                        if mesh.vert_of[d] in keep_verts})
        ns = [rw.new_dart() for _ in range(3)]
        for i, si in enumerate(s_darts):
            rw.set_opp(ns[i], (0, si))
            rw.set_nxt(ns[i], ns[nu[i]])
        new_mesh, maps, new_ids = rw.build(mesh.mode)
        out = _carry_colors(new_mesh, [maps[0]], [cp.colors], [mesh])
        parts.append((_finish(ColoredPolytope(new_mesh, out)),
                      tuple(new_ids[n] for n in ns)))
    (a, da), (b, db) = parts
    return a, b, (da, db)


def split_quad_edge_sum(cp: ColoredPolytope, face: int, pair: int
                        ) -> tuple[ColoredPolytope, ColoredPolytope,
                                   tuple[int, int, tuple[int, ...]]]:
    """Detach the triangular-prism factor around a quadrilateral.

    Inverts the cutting-edge operation: the quadrilateral plus its four
    (merged) neighbors form a prism factor glued along the four corner
    off-edges; the host closes with a restored edge whose containing faces
    are the neighbor pair selected by `pair` (0 or 1).

    Returns (host, prism_factor, (dart_host, dart_prism, theta)) such that
    edge_sum(host, prism_factor, ...) restores the input.
    """
    mesh = cp.mesh
    if mesh.face_degree(face) != 4:
        raise MoveError("NotAQuad", f"face {face}")
    g = mesh.faces[face]
    nb = [mesh.face_of[mesh.opp[gi]] for gi in g]
    z = [mesh.nxt[gi] for gi in g]
    o = [mesh.opp[zi] for zi in z]
    c = pair
    a1f, a2f, a3f, a4f = nb[c], nb[(c + 1) % 4], nb[(c + 2) % 4], nb[(c + 3) % 4]
    if len(set(nb)) != 4 or len({face, *nb}) != 5:
        raise MoveError(CONNECTIVITY_BREAK, "neighbors around the quad repeat")
    if mesh.faces_adjacent(a1f, a3f):
        raise MoveError(FACES_ALREADY_ADJACENT,
                        "selected containing pair is already adjacent")
    cs = cp.colors
    if gf2.rank({cs[a1f], cs[a3f], cs[a2f]}) != 3 or \
       gf2.rank({cs[a1f], cs[a3f], cs[a4f]}) != 3:
        raise MoveError(COLOR_MISMATCH, "restored edge would violate independence")
    doomed = set()
    for gi in g:
        doomed.add(gi)
        doomed.add(mesh.opp[gi])
    doomed.update(z)
    if set(o) & doomed:
        raise MoveError(CONNECTIVITY_BREAK, "corner stubs fold back into the quad")
    rw = _Rw(mesh)
    rw.kill(0, *doomed)
    p, a1, a2 = rw.new_dart(), rw.new_dart(), rw.new_dart()
    q, b1, b2 = rw.new_dart(), rw.new_dart(), rw.new_dart()
    rw.set_opp(p, q)
    rw.set_opp(a2, (0, o[(c + 1) % 4]))
    rw.set_opp(a1, (0, o[(c + 2) % 4]))
    rw.set_opp(b1, (0, o[c]))
    rw.set_opp(b2, (0, o[(c + 3) % 4]))
    for cyc in ((p, a1, a2), (q, b1, b2)):
        for i, d in enumerate(cyc):
            rw.set_nxt(d, cyc[(i + 1) % 3])
    new_mesh, maps, new_ids = rw.build(mesh.mode)
    host_colors = _carry_colors(new_mesh, [maps[0]], [cs], [mesh])
    host = _finish(ColoredPolytope(new_mesh, host_colors))

    from .mesh import prism  # local import to avoid cycle at module load
    factor_mesh = prism(3)
    factor = ColoredPolytope(
        factor_mesh, (cs[a2f], cs[a4f], cs[a1f], cs[a3f], cs[face]))
    _finish(factor)
    seam_prism = next(e for e in range(factor_mesh.n_edges)
                      if set(factor_mesh.edge_faces(e)) == {2, 3})
    target = canonical_code_colored(mesh, cs)
    e_host = new_mesh.edge_of[new_ids[p]]
    for dart_h in new_mesh.edges[e_host]:
        for dart_f in factor_mesh.edges[seam_prism]:
            try:
                glued = edge_sum(host, factor, dart_h, dart_f)
            except MoveError:
                continue
            if canonical_code_colored(glued.mesh, glued.colors) == target:
                return host, factor, (dart_h, dart_f, tuple(range(8)))
    raise MoveError(CONNECTIVITY_BREAK, "prism factor does not reglue to the input")


def _cuts_through(mesh: SphereMesh, edge: int) -> list[EdgeCut3]:
    """Non-trivial 3-edge cuts containing the given edge."""
    cuts = []
    ne = mesh.n_edges
    ev = [mesh.edge_verts(e) for e in range(ne)]
    u0 = ev[edge]
    for e2 in range(ne):
        if e2 == edge or ev[e2][0] in u0 or ev[e2][1] in u0:
            continue
        for e3 in range(e2 + 1, ne):
            if e3 == edge:
                continue
            if ev[e3][0] in u0 or ev[e3][1] in u0:
                continue
            if ev[e3][0] in ev[e2] or ev[e3][1] in ev[e2]:
                continue
            cut = mesh._try_cut(tuple(sorted((edge, e2, e3))))
            if cut is not None:
                cuts.append(cut)
    return cuts


def _edge_sum_refactor(cp: ColoredPolytope, w: int, x: int, y: int
                       ) -> tuple[ColoredPolytope, ColoredPolytope,
                                  tuple[int, int, tuple[int, ...]]] | None:
    """Try to exhibit cp as an edge sum by pinching face w along (x, y).

    Inverse surgery creates a new edge; when a rank-3 cut of the pinched mesh
    contains it, splitting there and undoing the pinch realizes cp as
    A edge-sum B.  Returns parts and glue data, or None.
    """
    leg = inverse_surgery_legality(cp, w, x, y, allow_adjacent=False)
    if not leg.legal:
        return None
    try:
        q_mesh, dmap, e_new = inverse_surgery_mesh(cp.mesh, w, x, y)
        q_colors = _carry_colors(q_mesh, [dmap], [cp.colors], [cp.mesh])
        q = _finish(ColoredPolytope(q_mesh, q_colors))
    except (MeshError, MoveError):
        return None
    target = canonical_code_colored(cp.mesh, cp.colors)
    for cut in _cuts_through(q.mesh, e_new):
        if gf2.rank({q.colors[f] for f in cut.belt}) != 3:
            continue
        try:
            a, b, (da, db) = split_vertex_sum(q, cut)
        except MoveError:
            continue
        j = cut.edges.index(e_new)
        ea = a.mesh.edge_of[a.mesh.opp[da[j]]]
        eb = b.mesh.edge_of[b.mesh.opp[db[j]]]
        for dart_a, dart_b, theta in edge_sum_gluings(a, b, ea, eb):
            glued = edge_sum(a, b, dart_a, dart_b, theta)
            if canonical_code_colored(glued.mesh, glued.colors) == target:
                if a.mesh.n_faces == 4 or b.mesh.n_faces == 4:
                    raise ExcludedDehnCase("one part is the simplex")
                return a, b, (dart_a, dart_b, theta)
    return None


def split_edge_sum(cp: ColoredPolytope, cut: EdgeCut3
                   ) -> tuple[ColoredPolytope, ColoredPolytope,
                              tuple[int, int, tuple[int, ...]]]:
    """Split along a rank-2 three-edge cut into an edge sum.

    Implements the decomposition along a 3-cycle of 2-independent faces:
    pinch one belt face by inverse surgery so that a rank-3 cut appears,
    split there, and verify the parts reglue to the input.  The case where
    a part is the simplex (plain Dehn surgery) is signalled distinctly.
    """
    mesh = cp.mesh
    belt_colors = {cp.colors[f] for f in cut.belt}
    if gf2.rank(belt_colors) != 2:
        raise MoveError(COLOR_MISMATCH, "cut faces do not have rank 2")
    if mesh.n_faces <= 5:
        raise MoveError(CONNECTIVITY_BREAK, "too small to split as an edge sum")
    for w in cut.belt:
        w_edges = mesh.face_edges(w)
        for i, x in enumerate(w_edges):
            for y in w_edges[i + 1:]:
                got = _edge_sum_refactor(cp, w, x, y)
                if got is not None:
                    return got
    raise MoveError(CONNECTIVITY_BREAK, "no edge-sum refactoring found at this cut")


def _cut_sides(mesh: SphereMesh, cut: EdgeCut3) -> tuple[set[int], set[int]]:
    banned = set(cut.edges)
    adj: list[list[int]] = [[] for _ in range(mesh.n_verts)]
    for e, (d, d2) in enumerate(mesh.edges):
        if e in banned:
            continue
        adj[mesh.vert_of[d]].append(mesh.vert_of[d2])
        adj[mesh.vert_of[d2]].append(mesh.vert_of[d])
    comp = [-1] * mesh.n_verts
    n_comp = 0
    for start in range(mesh.n_verts):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if comp[y] < 0:
                    comp[y] = n_comp
                    stack.append(y)
        n_comp += 1
    if n_comp != 2:
        raise MoveError(CONNECTIVITY_BREAK, "cut does not split into two sides")
    return ({v for v in range(mesh.n_verts) if comp[v] == 0},
            {v for v in range(mesh.n_verts) if comp[v] == 1})


def _deep_edge_sum_search(cp: ColoredPolytope) -> tuple[ColoredPolytope, ColoredPolytope,
                                                        tuple[int, int, tuple[int, ...]]] | None:
    """Edge-sum seams not witnessed by any 3-edge cut.

    A surgery blocked for connectivity reasons can hide a 4-edge seam; the
    pinch-then-split construction finds it.  Bounded scan over all faces and
    boundary edge pairs.
    """
    mesh = cp.mesh
    for w in range(mesh.n_faces):
        w_edges = mesh.face_edges(w)
        for i, x in enumerate(w_edges):
            for y in w_edges[i + 1:]:
                try:
                    got = _edge_sum_refactor(cp, w, x, y)
                except ExcludedDehnCase:
                    continue
                if got is not None:
                    return got
    return None


@dataclass(frozen=True)
class QuasiDecomposition:
    """A decomposition as a vertex sum or an edge sum (never the excluded
    simplex edge sum).  `glue` holds (dart_a, dart_b, theta) in the parts'
    own coordinates; regluing with the matching operation restores the input
    up to full equivalence."""
    kind: str  # "VertexSum" | "EdgeSum"
    parts: tuple[ColoredPolytope, ColoredPolytope]
    glue: tuple[int, int, tuple[int, ...]]
    witness_edges: tuple[int, ...]


def quasi_decompose(cp: ColoredPolytope, deep: bool = True) -> QuasiDecomposition | None:
    """First usable decomposition: rank-3 cuts as vertex sums, then rank-2
    cuts as edge sums, then prism seams around quadrilaterals, then (deep)
    the cut-free edge-sum search."""
    cuts = cp.mesh.three_edge_cuts()
    rank3 = [c for c in cuts if gf2.rank({cp.colors[f] for f in c.belt}) == 3]
    rank2 = [c for c in cuts if c not in rank3]
    for cut in rank3:
        try:
            a, b, (da, db) = split_vertex_sum(cp, cut)
        except MoveError:
            continue
        return QuasiDecomposition("VertexSum", (a, b),
                                  (da[0], db[0], tuple(range(8))), cut.edges)
    for cut in rank2:
        try:
            a, b, glue = split_edge_sum(cp, cut)
        except MoveError:  # includes the excluded simplex case
            continue
        return QuasiDecomposition("EdgeSum", (a, b), glue, cut.edges)
    for face in range(cp.mesh.n_faces):
        if cp.mesh.face_degree(face) != 4:
            continue
        for pair in (0, 1):
            try:
                host, factor, glue = split_quad_edge_sum(cp, face, pair)
            except MoveError:
                continue
            seam = tuple(sorted(cp.mesh.edge_of[cp.mesh.nxt[g]]
                                for g in cp.mesh.faces[face]))
            return QuasiDecomposition("EdgeSum", (host, factor), glue, seam)
    if deep:
        got = _deep_edge_sum_search(cp)
        if got is not None:
            a, b, glue = got
            return QuasiDecomposition("EdgeSum", (a, b), glue, ())
    return None


# -- move records and application ---------------------------------------------


def apply_move(move: Move, children: list[ColoredPolytope]) -> ColoredPolytope:
    """Apply a forward move; entity parameters address entities of the
    children, which must be canonical presentations."""
    tag = move.tag
    if tag in (CONN_SUM, EDGE_SUM):
        if len(children) != 2:
            raise MoveError("Arity", f"{tag} needs two operands")
        a, b = children
        im1, im2, im4 = move.get("theta")
        theta = gf2.theta_from_basis_images(im1, im2, im4)
        if theta is None:
            raise MoveError(COLOR_MISMATCH, "theta parameter is singular")
        try:
            if move.get("mirror"):
                b = mirror_cp(b)
        except KeyError:
            pass
        op = connected_sum if tag == CONN_SUM else edge_sum
        return op(a, b, move.get("dart_a"), move.get("dart_b"), theta)
    if len(children) != 1:
        raise MoveError("Arity", f"{tag} needs one operand")
    cp = children[0]
    if tag == SURGERY:
        return surgery(cp, move.get("edge"))
    if tag == INVERSE_SURGERY:
        return inverse_surgery(cp, move.get("face"), move.get("e1"), move.get("e3"))
    if tag == RELAXED_BLOW_UP_P2:
        return relaxed_blow_up_p2(cp, move.get("face"), move.get("e1"), move.get("e3"))
    if tag == DEHN:
        return dehn(cp, move.get("edge"), move.get("end"))
    if tag == BLOW_UP:
        return blow_up(cp, move.get("vertex"))
    if tag == BLOW_DOWN:
        return blow_down(cp, move.get("face"))
    if tag == BIGON_BLOW_DOWN:
        return bigon_blow_down(cp, move.get("face"))
    if tag == RECOLOR:
        return recolor_polygon(cp, move.get("face"), move.get("w"))
    raise MoveError("UnknownTag", tag)


def legality(cp: ColoredPolytope, move: Move) -> Legality:
    """Full precondition evaluation without mutation (unary moves)."""
    tag = move.tag
    try:
        if tag == SURGERY:
            return surgery_legality(cp, move.get("edge"))
        if tag == INVERSE_SURGERY:
            return inverse_surgery_legality(cp, move.get("face"),
                                            move.get("e1"), move.get("e3"))
        if tag == RELAXED_BLOW_UP_P2:
            return inverse_surgery_legality(cp, move.get("face"), move.get("e1"),
                                            move.get("e3"), allow_adjacent=True)
        if tag == DEHN:
            return dehn_legality(cp, move.get("edge"))
        if tag == BLOW_UP:
            v = move.get("vertex")
            return LEGAL if 0 <= v < cp.mesh.n_verts else Legality(False, "UnknownEntity")
        if tag == BLOW_DOWN:
            return blow_down_legality(cp, move.get("face"))
        if tag == RECOLOR:
            f = move.get("face")
            w = move.get("w")
            nb = {cp.colors[g] for g in cp.mesh.face_neighbors(f)}
            if gf2.rank(nb) != 2:
                return Legality(False, COLOR_MISMATCH)
            if w == 0 or w not in gf2.span(nb):
                return Legality(False, COLOR_MISMATCH)
            return LEGAL
    except (KeyError, IndexError, MoveError):
        return Legality(False, "UnknownEntity")
    return Legality(False, "UnknownTag")
