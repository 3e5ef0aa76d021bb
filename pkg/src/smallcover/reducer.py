"""Reduction engines: decompose colored meshes into basic pieces.

A reduction produces a construction tree: leaves are named basic pieces,
internal nodes are forward moves whose replay rebuilds the target up to full
equivalence.  Every intermediate piece is kept in canonical presentation, so
entity ids double as canonical labels and replay is deterministic.

Strategies:
  general      vertex/edge sums plus surgery and Dehn surgery
  orientable   the same engine, restricted to 4-colored orientable input
  linear       the same engine, restricted to 3-colored input
  nondecreasing  forward moves only from {sum, edge sum, inverse surgery,
                 quad recoloring}
  relaxed      cell decompositions of the disc boundary, reduced to the
               theta decomposition plus connector pieces
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from . import basics, gf2, moves
from .canon import canonical_code_colored, canonical_colored_form, code_hex
from .coloring import ColoredPolytope, face_independence, is_orientable
from .mesh import RELAXED, STRICT

GENERAL_4_8 = "general"
ORIENTABLE_4_2 = "orientable"
LINEAR_4_1 = "linear"
NON_DECREASING_5_5 = "nondecreasing"
RELAXED_6_3 = "relaxed"

STRATEGIES = (GENERAL_4_8, ORIENTABLE_4_2, LINEAR_4_1, NON_DECREASING_5_5, RELAXED_6_3)

LEAF_SETS = {
    GENERAL_4_8: frozenset({basics.DELTA3, basics.CUBE_L0, basics.P33_L1, basics.P33_L2}),
    ORIENTABLE_4_2: frozenset({basics.DELTA3, basics.CUBE_L0}),
    LINEAR_4_1: frozenset({basics.CUBE_L0}),
    NON_DECREASING_5_5: frozenset({basics.DELTA3, basics.P33_L1, basics.P33_L2}),
    RELAXED_6_3: frozenset({basics.THETA, basics.DELTA3, basics.P32_L1, basics.P33_L2}),
}

MOVE_SETS = {
    GENERAL_4_8: frozenset({moves.CONN_SUM, moves.EDGE_SUM, moves.SURGERY,
                            moves.DEHN, moves.BLOW_UP}),
    ORIENTABLE_4_2: frozenset({moves.CONN_SUM, moves.EDGE_SUM, moves.SURGERY,
                               moves.DEHN, moves.BLOW_UP}),
    LINEAR_4_1: frozenset({moves.CONN_SUM, moves.EDGE_SUM, moves.SURGERY,
                           moves.DEHN, moves.BLOW_UP}),
    NON_DECREASING_5_5: frozenset({moves.CONN_SUM, moves.EDGE_SUM,
                                   moves.INVERSE_SURGERY, moves.RECOLOR}),
    RELAXED_6_3: frozenset({moves.CONN_SUM, moves.EDGE_SUM, moves.INVERSE_SURGERY,
                            moves.RELAXED_BLOW_UP_P2}),
}


class TheoremViolation(RuntimeError):
    """No recipe applies and no quasi-decomposition exists; this would
    contradict the decomposition theorems."""


class ReplayError(RuntimeError):
    pass


@dataclass(frozen=True)
class TreeNode:
    move: moves.Move | None      # None for leaves
    leaf: str | None             # basic-piece name for leaves
    children: tuple["TreeNode", ...]
    code: bytes                  # full-equivalence code of the piece built here

    def is_leaf(self) -> bool:
        return self.leaf is not None

    def iter_nodes(self) -> Iterator["TreeNode"]:
        yield self
        for c in self.children:
            yield from c.iter_nodes()


@dataclass(frozen=True)
class ConstructionTree:
    root: TreeNode
    mode: str
    strategy: str

    def leaves(self) -> tuple[str, ...]:
        return tuple(n.leaf for n in self.root.iter_nodes() if n.is_leaf())

    def move_tags(self) -> tuple[str, ...]:
        return tuple(n.move.tag for n in self.root.iter_nodes() if n.move is not None)


def check_leaves(tree: ConstructionTree, strategy: str) -> bool:
    """Leaves within the strategy's allowed basic set, move tags within its
    forward move set."""
    allowed_leaves = LEAF_SETS[strategy]
    allowed_moves = MOVE_SETS[strategy]
    return (all(l in allowed_leaves for l in tree.leaves())
            and all(t in allowed_moves for t in tree.move_tags()))


# -- canonicalization helpers -------------------------------------------------


def _canon(cp: ColoredPolytope) -> tuple[ColoredPolytope, tuple[int, ...], tuple[int, ...]]:
    mesh, colors, dmap, theta = canonical_colored_form(cp.mesh, cp.colors)
    return ColoredPolytope(mesh, colors), dmap, theta


def _map_edge(cp_from: ColoredPolytope, dmap: Sequence[int], star: ColoredPolytope, e: int) -> int:
    return star.mesh.edge_of[dmap[cp_from.mesh.edges[e][0]]]


def _map_face(cp_from: ColoredPolytope, dmap: Sequence[int], star: ColoredPolytope, f: int) -> int:
    """Image of a face under a canonicalizing dart map.

    A reflecting relabeling sends the face through d to the star face through
    the image of opp(d); checking the dart set picks the right side.
    """
    darts = cp_from.mesh.faces[f]
    cand = star.mesh.face_of[dmap[darts[0]]]
    if {dmap[d] for d in darts} == set(star.mesh.faces[cand]):
        return cand
    return star.mesh.face_of[dmap[cp_from.mesh.opp[darts[0]]]]


def _theta_params(theta: Sequence[int]) -> tuple[int, int, int]:
    return (theta[1], theta[2], theta[4])


def _binary_node(tag: str, a_raw: ColoredPolytope, b_raw: ColoredPolytope,
                 glue: tuple[int, int, tuple[int, ...]], target_code: bytes,
                 build) -> TreeNode:
    """Canonicalize both parts and re-derive the gluing against them.

    Canonicalization may reflect either part, which changes the chirality of
    the recorded pairing, so the alignment (and a possible mirror of the
    second operand) is re-found by bounded search and verified by code.
    """
    dart_a, dart_b, _ = glue
    a_star, map_a, _ = _canon(a_raw)
    b_star, map_b, _ = _canon(b_raw)
    da0 = map_a[dart_a]
    db0 = map_b[dart_b]
    for use_mirror in (0, 1):
        b_eff = moves.mirror_cp(b_star) if use_mirror else b_star
        if tag == moves.CONN_SUM:
            cands_a = [da0]
            cands_b = b_eff.mesh.verts[b_eff.mesh.vert_of[db0]]
            pairs_fn = moves.conn_sum_merged_pairs
        else:
            cands_a = a_star.mesh.edges[a_star.mesh.edge_of[da0]]
            cands_b = b_eff.mesh.edges[b_eff.mesh.edge_of[db0]]
            pairs_fn = moves.edge_sum_merged_pairs
        for da in cands_a:
            for db in cands_b:
                pairs = pairs_fn(a_star.mesh, b_eff.mesh, da, db)
                theta = gf2.theta_mapping([b_eff.colors[fb] for _, fb in pairs[:3]],
                                          [a_star.colors[fa] for fa, _ in pairs[:3]])
                if theta is None:
                    continue
                if any(theta[b_eff.colors[fb]] != a_star.colors[fa]
                       for fa, fb in pairs[3:]):
                    continue
                move = moves.Move.make(tag, dart_a=da, dart_b=db,
                                       theta=_theta_params(theta), mirror=use_mirror)
                try:
                    rebuilt = moves.apply_move(move, [a_star, b_star])
                except moves.MoveError:
                    continue
                if canonical_code_colored(rebuilt.mesh, rebuilt.colors) == target_code:
                    return TreeNode(move, None, (build(a_star), build(b_star)),
                                    target_code)
    raise moves.MoveError(moves.CONNECTIVITY_BREAK,
                          "no gluing of the canonical parts rebuilds the piece")


# -- the engine ---------------------------------------------------------------


class _Engine:
    def __init__(self, strategy: str, mode: str, seed: int,
                 cache: dict[bytes, TreeNode] | None):
        self.strategy = strategy
        self.mode = mode
        self.rng_seed = seed
        self.cache = cache if cache is not None else {}
        self.in_progress: set[bytes] = set()
        self.fuel = 0

    # entity orderings with optional seeded shuffling of ties
    def _face_order(self, cp: ColoredPolytope) -> list[int]:
        faces = [f for f in range(cp.mesh.n_faces) if cp.mesh.face_degree(f) <= 5]
        if self.rng_seed:
            import random
            rng = random.Random((self.rng_seed,
                                 canonical_code_colored(cp.mesh, cp.colors)))
            rng.shuffle(faces)
            faces.sort(key=cp.mesh.face_degree)
        else:
            faces.sort(key=lambda f: (cp.mesh.face_degree(f), f))
        return faces

    def build(self, cp_star: ColoredPolytope) -> TreeNode:
        code = canonical_code_colored(cp_star.mesh, cp_star.colors)
        hit = self.cache.get(code)
        if hit is not None:
            return hit
        if code in self.in_progress:
            raise moves.MoveError(moves.CONNECTIVITY_BREAK, "reduction cycle")
        self.fuel -= 1
        if self.fuel <= 0:
            raise TheoremViolation("reduction fuel exhausted")
        self.in_progress.add(code)
        try:
            node = self._build_inner(cp_star, code)
        finally:
            self.in_progress.discard(code)
        self.cache[code] = node
        return node

    def _build_inner(self, cp: ColoredPolytope, code: bytes) -> TreeNode:
        name = basics.identify_basic(cp)
        leaf_set = LEAF_SETS[self.strategy]
        if name in leaf_set:
            return TreeNode(None, name, (), code)
        if self.strategy == NON_DECREASING_5_5 and name == basics.CUBE_L0:
            node = self._recolor_intercept(cp, code)
            if node is not None:
                return node
        split = self._try_quasi(cp, code)
        if split is not None:
            return split
        node = self._recipes(cp, code)
        if node is not None:
            return node
        raise TheoremViolation(
            f"no recipe applies to a {cp.mesh.n_faces}-face piece "
            f"(code {code_hex(code)[:24]}...)")

    # -- shared steps ---------------------------------------------------

    def _try_quasi(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        f_total = cp.mesh.n_faces
        for qd in _quasi_candidates(cp):
            a, b = qd.parts
            if a.mesh.n_faces >= f_total or b.mesh.n_faces >= f_total:
                continue
            tag = moves.CONN_SUM if qd.kind == "VertexSum" else moves.EDGE_SUM
            try:
                return _binary_node(tag, a, b, qd.glue, code, self.build)
            except moves.MoveError:
                continue
        return None

    def _unary_then(self, cp: ColoredPolytope, code: bytes, tag: str,
                    q_raw: ColoredPolytope, params_raw: dict) -> TreeNode:
        """Record `cp = move(q)`: canonicalize q, transport params, recurse."""
        q_star, dmap, th_q = _canon(q_raw)
        params = {}
        for key, val in params_raw.items():
            kind, raw = val
            if kind == "edge":
                params[key] = _map_edge(q_raw, dmap, q_star, raw)
            elif kind == "face":
                params[key] = _map_face(q_raw, dmap, q_star, raw)
            elif kind == "vertex":
                params[key] = q_star.mesh.vert_of[dmap[q_raw.mesh.verts[raw][0]]]
            elif kind == "color":
                params[key] = th_q[raw]
            else:
                params[key] = raw
        move = moves.Move.make(tag, **params)
        rebuilt = moves.apply_move(move, [q_star])
        if canonical_code_colored(rebuilt.mesh, rebuilt.colors) != code:
            raise moves.MoveError(moves.CONNECTIVITY_BREAK,
                                  "recorded unary move does not rebuild the piece")
        return TreeNode(move, None, (self.build(q_star),), code)

    def _surgery_reduction(self, cp: ColoredPolytope, code: bytes, e: int) -> TreeNode:
        """Reduce by surgery along e; the forward move is inverse surgery."""
        q, w_face, x_edge, y_edge = _surgery_with_params(cp, e)
        tag = moves.INVERSE_SURGERY
        if self.strategy == RELAXED_6_3 and q.mesh.edges_adjacent(x_edge, y_edge):
            tag = moves.RELAXED_BLOW_UP_P2
        return self._unary_then(cp, code, tag, q, {
            "face": ("face", w_face), "e1": ("edge", x_edge), "e3": ("edge", y_edge)})

    def _dehn_reduction(self, cp: ColoredPolytope, code: bytes, e: int) -> TreeNode:
        """Reduce by Dehn surgery along e (an involution)."""
        q_raw = moves.dehn(cp, e)
        if self.strategy in (NON_DECREASING_5_5, RELAXED_6_3):
            # represent the forward Dehn surgery as edge sum with the simplex
            q_star, _, _ = _canon(q_raw)
            delta = basics.basic_rep(basics.DELTA3, self.mode)
            for e2 in range(q_star.mesh.n_edges):
                if not moves.dehn_legality(q_star, e2).legal:
                    continue
                for dart_a in q_star.mesh.edges[e2]:
                    for dart_b in range(delta.mesh.n_darts):
                        pairs = moves.edge_sum_merged_pairs(
                            q_star.mesh, delta.mesh, dart_a, dart_b)
                        theta = gf2.theta_mapping(
                            [delta.colors[fb] for _, fb in pairs[:3]],
                            [q_star.colors[fa] for fa, _ in pairs[:3]])
                        if theta is None or \
                           theta[delta.colors[pairs[3][1]]] != q_star.colors[pairs[3][0]]:
                            continue
                        move = moves.Move.make(moves.EDGE_SUM, dart_a=dart_a,
                                               dart_b=dart_b,
                                               theta=_theta_params(theta))
                        try:
                            rebuilt = moves.apply_move(move, [q_star, delta])
                        except moves.MoveError:
                            continue
                        if canonical_code_colored(rebuilt.mesh, rebuilt.colors) == code:
                            leaf = TreeNode(None, basics.DELTA3, (),
                                            canonical_code_colored(delta.mesh, delta.colors))
                            return TreeNode(move, None,
                                            (self.build(q_star), leaf), code)
            raise moves.MoveError(moves.CONNECTIVITY_BREAK,
                                  "Dehn reduction not expressible as simplex edge sum")
        # find the return edge so the forward move is Dehn again
        q_star, _, _ = _canon(q_raw)
        for e2 in range(q_star.mesh.n_edges):
            if not moves.dehn_legality(q_star, e2).legal:
                continue
            back = moves.dehn(q_star, e2)
            if canonical_code_colored(back.mesh, back.colors) == code:
                move = moves.Move.make(moves.DEHN, edge=e2, end=0)
                got = moves.apply_move(move, [q_star])
                if canonical_code_colored(got.mesh, got.colors) == code:
                    return TreeNode(move, None, (self.build(q_star),), code)
        raise moves.MoveError(moves.CONNECTIVITY_BREAK, "Dehn surgery did not invert")

    def _blow_down_reduction(self, cp: ColoredPolytope, code: bytes, face: int) -> TreeNode:
        q_raw, vertex = _blow_down_with_vertex(cp, face)
        if self.strategy in (NON_DECREASING_5_5, RELAXED_6_3):
            # represent as connected sum with the simplex
            q_star, dmap, _ = _canon(q_raw)
            v_star = q_star.mesh.vert_of[dmap[q_raw.mesh.verts[vertex][0]]]
            delta = basics.basic_rep(basics.DELTA3, self.mode)
            for dart_a, dart_b, theta in moves.connected_sum_gluings(
                    q_star, delta, v_star, 0):
                move = moves.Move.make(moves.CONN_SUM, dart_a=dart_a, dart_b=dart_b,
                                       theta=_theta_params(theta))
                rebuilt = moves.apply_move(move, [q_star, delta])
                if canonical_code_colored(rebuilt.mesh, rebuilt.colors) == code:
                    leaf = TreeNode(None, basics.DELTA3, (),
                                    canonical_code_colored(delta.mesh, delta.colors))
                    return TreeNode(move, None, (self.build(q_star), leaf), code)
            raise moves.MoveError(moves.CONNECTIVITY_BREAK,
                                  "triangle does not reglue as a simplex sum")
        return self._unary_then(cp, code, moves.BLOW_UP, q_raw,
                                {"vertex": ("vertex", vertex)})

    def _quad_seam_reduction(self, cp: ColoredPolytope, code: bytes, face: int) -> TreeNode | None:
        for pair in (0, 1):
            try:
                host, factor, glue = moves.split_quad_edge_sum(cp, face, pair)
            except moves.MoveError:
                continue
            try:
                return _binary_node(moves.EDGE_SUM, host, factor, glue, code, self.build)
            except moves.MoveError:
                continue
        return None

    # -- strategy recipes --------------------------------------------------

    def _recipes(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        if self.strategy == RELAXED_6_3:
            return self._relaxed_recipes(cp, code)
        if self.strategy == NON_DECREASING_5_5:
            return self._nondecreasing_recipes(cp, code)
        return self._general_recipes(cp, code)

    def _general_recipes(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        for face in self._face_order(cp):
            deg = cp.mesh.face_degree(face)
            j = face_independence(cp.mesh, cp.colors, face)
            try:
                if j == 3:
                    node = self._recipe_3indep(cp, code, face, deg)
                else:
                    node = self._recipe_2indep(cp, code, face, deg)
            except moves.MoveError:
                node = None
            if node is not None:
                return node
        return None

    def _recipe_3indep(self, cp: ColoredPolytope, code: bytes,
                       face: int, deg: int) -> TreeNode | None:
        if deg == 3:
            if moves.blow_down_legality(cp, face).legal:
                try:
                    return self._blow_down_reduction(cp, code, face)
                except moves.MoveError:
                    return None
            return None
        if deg == 4:
            return self._quad_seam_reduction(cp, code, face)
        if deg == 5:
            # Dehn surgery along a 0-sum boundary edge keeping the face
            # 3-independent, then the quadrilateral step
            for e in cp.mesh.face_edges(face):
                if not moves.dehn_legality(cp, e).legal:
                    continue
                q_raw = moves.dehn(cp, e)
                q_star, _, _ = _canon(q_raw)
                if not _has_3indep_small(q_star) and \
                   basics.identify_basic(q_star) is None and \
                   next(_quasi_candidates(q_star), None) is None:
                    continue
                try:
                    return self._dehn_reduction(cp, code, e)
                except moves.MoveError:
                    continue
        return None

    def _recipe_2indep(self, cp: ColoredPolytope, code: bytes,
                       face: int, deg: int) -> TreeNode | None:
        if self.strategy == NON_DECREASING_5_5:
            raise AssertionError("handled by _nondecreasing_recipes")
        if deg == 3:
            return None  # covered by the rank-2 cut splits
        # inverse-surgery chains of depth <= 2 that expose a decomposition
        return self._pinch_search(cp, code, face, depth=2)

    def _pinch_search(self, cp: ColoredPolytope, code: bytes, face: int,
                      depth: int) -> TreeNode | None:
        """Prop 4.6-style: pinch near the face so a decomposition appears.

        Each candidate is recorded as cp = surgery(q); the recursion on q
        must immediately split (quasi) into strictly smaller parts, except
        that the pentagon's 5-face prism factor is tolerated.
        """
        mesh = cp.mesh
        f_total = mesh.n_faces
        near = [face, *mesh.face_neighbors(face)]
        seen = set()
        candidates = []
        for w in near:
            if w in seen:
                continue
            seen.add(w)
            w_edges = mesh.face_edges(w)
            for i, x in enumerate(w_edges):
                for y in w_edges[i + 1:]:
                    if moves.inverse_surgery_legality(cp, w, x, y).legal:
                        candidates.append((w, x, y))
        for w, x, y in candidates:
            try:
                q_raw = moves.inverse_surgery(cp, w, x, y)
            except moves.MoveError:
                continue
            q_star, _, _ = _canon(q_raw)
            ok = False
            for qd in _quasi_candidates(q_star):
                fa, fb = (p.mesh.n_faces for p in qd.parts)
                if (fa < f_total and fb < f_total) or sorted((fa, fb))[0] == 5:
                    ok = True
                    break
            if ok:
                # forward: cp = surgery(q) along the new edge
                e_new = _new_edge_after_pinch(cp, w, x, y)
                return self._q_surgery_node(cp, code, q_raw, e_new)
            if depth > 1:
                node = self._pinch_deeper(cp, code, q_raw, f_total)
                if node is not None:
                    return node
        return None

    def _pinch_deeper(self, cp: ColoredPolytope, code: bytes,
                      q_raw: ColoredPolytope, f_total: int) -> TreeNode | None:
        q_star, _, _ = _canon(q_raw)
        mesh = q_star.mesh
        for w in range(mesh.n_faces):
            w_edges = mesh.face_edges(w)
            for i, x in enumerate(w_edges):
                for y in w_edges[i + 1:]:
                    if not moves.inverse_surgery_legality(q_star, w, x, y).legal:
                        continue
                    try:
                        q2 = moves.inverse_surgery(q_star, w, x, y)
                    except moves.MoveError:
                        continue
                    q2_star, _, _ = _canon(q2)
                    good = any(all(p.mesh.n_faces < f_total for p in qd.parts)
                               for qd in _quasi_candidates(q2_star))
                    if good:
                        e_new = _new_edge_after_pinch(q_star, w, x, y)
                        inner = self._q_surgery_node(q_star, canonical_code_colored(
                            q_star.mesh, q_star.colors), q2, e_new)
                        # cache the q_star tree, then record cp = surgery(q_star)
                        self.cache[inner.code] = inner
                        e0 = _surgery_site_recovering(q_star, cp)
                        if e0 is None:
                            continue
                        return self._surgery_reduction_from(cp, code, q_star, e0)
        return None

    def _q_surgery_node(self, cp: ColoredPolytope, code: bytes,
                        q_raw: ColoredPolytope, e_new_in_q: int) -> TreeNode:
        """cp == surgery(q_raw, e_new); the forward move undoes the pinch."""
        q_star, dmap, _ = _canon(q_raw)
        e_star = q_star.mesh.edge_of[dmap[q_raw.mesh.edges[e_new_in_q][0]]]
        return self._record_surgery_forward(cp, code, q_star, e_star)

    def _record_surgery_forward(self, cp: ColoredPolytope, code: bytes,
                                q_star: ColoredPolytope, e_star: int) -> TreeNode:
        move = moves.Move.make(moves.SURGERY, edge=e_star)
        rebuilt = moves.apply_move(move, [q_star])
        if canonical_code_colored(rebuilt.mesh, rebuilt.colors) != code:
            raise moves.MoveError(moves.CONNECTIVITY_BREAK,
                                  "surgery forward move does not rebuild")
        return TreeNode(move, None, (self.build(q_star),), code)

    def _surgery_reduction_from(self, cp: ColoredPolytope, code: bytes,
                                q_star: ColoredPolytope, e_star: int) -> TreeNode:
        return self._record_surgery_forward(cp, code, q_star, e_star)

    # -- nondecreasing strategy ----------------------------------------

    def _recolor_intercept(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        """The 3-colored cube is not a leaf here; it arises by recoloring."""
        for face in range(cp.mesh.n_faces):
            nb = {cp.colors[g] for g in cp.mesh.face_neighbors(face)}
            if gf2.rank(nb) != 2:
                continue
            for w in sorted(gf2.span(nb) - {0}):
                try:
                    q_raw = moves.recolor_polygon(cp, face, w)
                except moves.MoveError:
                    continue
                if len(set(q_raw.colors)) <= len(set(cp.colors)):
                    continue  # want a proper 4-coloring to recurse on
                try:
                    return self._unary_then(cp, code, moves.RECOLOR, q_raw, {
                        "face": ("face", face), "w": ("color", w)})
                except moves.MoveError:
                    continue
        return None

    def _nondecreasing_recipes(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        mesh = cp.mesh
        # surgery wherever both containing faces stay big enough
        for e in range(mesh.n_edges):
            if moves.surgery_legality(cp, e).legal:
                try:
                    return self._surgery_reduction(cp, code, e)
                except moves.MoveError:
                    continue
        for face in self._face_order(cp):
            deg = mesh.face_degree(face)
            j = face_independence(mesh, cp.colors, face)
            try:
                if j == 3:
                    node = self._recipe_3indep(cp, code, face, deg)
                    if node is not None:
                        return node
                elif deg == 4:
                    node = self._quad_recolor_macro(cp, code, face)
                    if node is not None:
                        return node
            except moves.MoveError:
                continue
        return None

    def _quad_recolor_macro(self, cp: ColoredPolytope, code: bytes, face: int) -> TreeNode | None:
        """Recolor an isolated 2-independent quadrilateral so a corner edge
        gets matching end colors, then compress it by surgery."""
        mesh = cp.mesh
        nb_colors = {cp.colors[g] for g in mesh.face_neighbors(face)}
        if gf2.rank(nb_colors) != 2:
            return None
        v2 = gf2.span(nb_colors)
        for g in mesh.faces[face]:
            z = mesh.nxt[g]             # corner off-edge dart at this corner
            e_corner = mesh.edge_of[z]
            far = mesh.opp[z]
            x_face = mesh.face_of[mesh.nxt[mesh.nxt[far]]]  # end face beyond
            w = cp.colors[face] ^ cp.colors[x_face]
            if w == 0 or w not in v2:
                continue
            try:
                recolored = moves.recolor_polygon(cp, face, w)
            except moves.MoveError:
                continue
            if not moves.surgery_legality(recolored, e_corner).legal:
                continue
            rec_star, dmap, th = _canon(recolored)
            e_star = rec_star.mesh.edge_of[dmap[mesh.edges[e_corner][0]]]
            f_star = _map_face(recolored, dmap, rec_star, face)
            w_star = th[w]
            inner = self._surgery_reduction(rec_star, canonical_code_colored(
                rec_star.mesh, rec_star.colors), e_star)
            self.cache[inner.code] = inner
            move = moves.Move.make(moves.RECOLOR, face=f_star, w=w_star)
            rebuilt = moves.apply_move(move, [rec_star])
            if canonical_code_colored(rebuilt.mesh, rebuilt.colors) != code:
                continue
            return TreeNode(move, None, (inner,), code)
        return None

    # -- relaxed strategy ------------------------------------------------

    def _relaxed_recipes(self, cp: ColoredPolytope, code: bytes) -> TreeNode | None:
        mesh = cp.mesh
        bigons = [f for f in range(mesh.n_faces) if mesh.face_degree(f) == 2]
        if bigons:
            node = self._bigon_recipes(cp, code, bigons[0])
            if node is not None:
                return node
        for e in range(mesh.n_edges):
            if moves.surgery_legality(cp, e).legal:
                try:
                    return self._surgery_reduction(cp, code, e)
                except moves.MoveError:
                    continue
        for face in self._face_order(cp):
            deg = mesh.face_degree(face)
            if deg < 3:
                continue
            j = face_independence(mesh, cp.colors, face)
            if j != 3:
                continue
            try:
                node = self._recipe_3indep(cp, code, face, deg)
            except moves.MoveError:
                node = None
            if node is not None:
                return node
        return None

    def _bigon_recipes(self, cp: ColoredPolytope, code: bytes, bigon: int) -> TreeNode | None:
        mesh = cp.mesh
        # absorb the bigon by surgery along an off-edge whose end colors match
        x, y = mesh.faces[bigon]
        for v in (mesh.vert_of[x], mesh.vert_of[y]):
            for d in mesh.verts[v]:
                e = mesh.edge_of[d]
                if e in (mesh.edge_of[x], mesh.edge_of[y]):
                    continue
                if moves.surgery_legality(cp, e).legal:
                    try:
                        return self._surgery_reduction(cp, code, e)
                    except moves.MoveError:
                        continue
        # contract; then either a relaxed pinch or a bigon-prism sum restores it
        try:
            host_raw = moves.bigon_blow_down(cp, bigon)
        except moves.MoveError:
            return None
        host_star, _, _ = _canon(host_raw)
        h_mesh = host_star.mesh
        for w in range(h_mesh.n_faces):
            w_edges = h_mesh.face_edges(w)
            for i, x_e in enumerate(w_edges):
                for y_e in w_edges[i + 1:]:
                    if not h_mesh.edges_adjacent(x_e, y_e):
                        continue
                    leg = moves.inverse_surgery_legality(host_star, w, x_e, y_e,
                                                         allow_adjacent=True)
                    if not leg.legal:
                        continue
                    move = moves.Move.make(moves.RELAXED_BLOW_UP_P2,
                                           face=w, e1=x_e, e3=y_e)
                    try:
                        rebuilt = moves.apply_move(move, [host_star])
                    except moves.MoveError:
                        continue
                    if canonical_code_colored(rebuilt.mesh, rebuilt.colors) == code:
                        return TreeNode(move, None, (self.build(host_star),), code)
        # separated bigon-prism factor
        for name in (basics.P32_L1, basics.P32_L0, basics.P32_L2):
            factor = basics.basic_rep(name, RELAXED)
            for v in range(h_mesh.n_verts):
                for v2 in range(factor.mesh.n_verts):
                    for dart_a, dart_b, theta in moves.connected_sum_gluings(
                            host_star, factor, v, v2):
                        move = moves.Move.make(moves.CONN_SUM, dart_a=dart_a,
                                               dart_b=dart_b,
                                               theta=_theta_params(theta))
                        rebuilt = moves.apply_move(move, [host_star, factor])
                        if canonical_code_colored(rebuilt.mesh, rebuilt.colors) == code:
                            return TreeNode(move, None,
                                            (self.build(host_star), self.build(factor)),
                                            code)
        return None


# -- helpers shared with the engine -------------------------------------------


def _quasi_candidates(cp: ColoredPolytope) -> Iterator[moves.QuasiDecomposition]:
    """All usable decompositions, cheapest witnesses first."""
    cuts = cp.mesh.three_edge_cuts()
    rank3 = [c for c in cuts if gf2.rank({cp.colors[f] for f in c.belt}) == 3]
    rank2 = [c for c in cuts if gf2.rank({cp.colors[f] for f in c.belt}) == 2]
    for cut in rank3:
        try:
            a, b, (da, db) = moves.split_vertex_sum(cp, cut)
        except moves.MoveError:
            continue
        yield moves.QuasiDecomposition("VertexSum", (a, b),
                                       (da[0], db[0], tuple(range(8))), cut.edges)
    for cut in rank2:
        try:
            a, b, glue = moves.split_edge_sum(cp, cut)
        except moves.MoveError:
            continue
        yield moves.QuasiDecomposition("EdgeSum", (a, b), glue, cut.edges)
    for face in range(cp.mesh.n_faces):
        if cp.mesh.face_degree(face) != 4:
            continue
        for pair in (0, 1):
            try:
                host, factor, glue = moves.split_quad_edge_sum(cp, face, pair)
            except moves.MoveError:
                continue
            seam = tuple(sorted(cp.mesh.edge_of[cp.mesh.nxt[g]]
                                for g in cp.mesh.faces[face]))
            yield moves.QuasiDecomposition("EdgeSum", (host, factor), glue, seam)


def _has_3indep_small(cp: ColoredPolytope) -> bool:
    return any(cp.mesh.face_degree(f) <= 4 and
               face_independence(cp.mesh, cp.colors, f) == 3
               for f in range(cp.mesh.n_faces))


def _surgery_with_params(cp: ColoredPolytope, e: int
                         ) -> tuple[ColoredPolytope, int, int, int]:
    """surgery(cp, e) plus the (face, e1, e3) of the inverting pinch."""
    mesh = cp.mesh
    p, q = mesh.edges[e]
    a1, a2 = mesh.nxt[p], mesh.nxt[mesh.nxt[p]]
    new_mesh, dmap = moves.surgery_mesh(mesh, e)
    out = moves._carry_colors(new_mesh, [dmap], [cp.colors], [mesh])
    q_cp = ColoredPolytope(new_mesh, out)
    x_edge = new_mesh.edge_of[dmap[mesh.opp[a2]]]   # fused F1-side edge
    y_edge = new_mesh.edge_of[dmap[mesh.opp[a1]]]   # fused F3-side edge
    w_face = new_mesh.face_of[dmap[mesh.opp[a1]]]   # the merged end face
    return q_cp, w_face, x_edge, y_edge


def _blow_down_with_vertex(cp: ColoredPolytope, face: int) -> tuple[ColoredPolytope, int]:
    mesh = cp.mesh
    z0 = mesh.nxt[mesh.faces[face][0]]
    q = moves.blow_down(cp, face)
    # rebuild the dart map to locate the restored vertex
    t = mesh.faces[face]
    rw = moves._Rw(mesh)
    z = [mesh.nxt[tk] for tk in t]
    for tk in t:
        rw.kill(0, tk, mesh.opp[tk])
    for k in range(3):
        rw.set_nxt((0, z[k]), (0, z[(k - 1) % 3]))
    new_mesh, maps, _ = rw.build(mesh.mode)
    return q, q.mesh.vert_of[maps[0][z0]]


def _new_edge_after_pinch(cp: ColoredPolytope, w: int, x: int, y: int) -> int:
    _, _, e_new = moves.inverse_surgery_mesh(cp.mesh, w, x, y)
    return e_new


def _surgery_site_recovering(q_star: ColoredPolytope, cp: ColoredPolytope) -> int | None:
    target = canonical_code_colored(cp.mesh, cp.colors)
    for e in range(q_star.mesh.n_edges):
        if not moves.surgery_legality(q_star, e).legal:
            continue
        got = moves.surgery(q_star, e)
        if canonical_code_colored(got.mesh, got.colors) == target:
            return e
    return None


# -- public API ----------------------------------------------------------------


def reduce(cp: ColoredPolytope, strategy: str = GENERAL_4_8, seed: int = 0,
           cache: dict[bytes, TreeNode] | None = None) -> ConstructionTree:
    """Decompose cp into basic pieces under the given strategy."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    mode = cp.mode
    if strategy == RELAXED_6_3 and mode != RELAXED:
        raise ValueError("relaxed strategy needs a relaxed-mode input")
    if strategy in (GENERAL_4_8, ORIENTABLE_4_2, LINEAR_4_1, NON_DECREASING_5_5) \
            and mode != STRICT:
        raise ValueError(f"{strategy} strategy needs a strict-mode input")
    k = len(set(cp.colors))
    if strategy == LINEAR_4_1 and k != 3:
        raise ValueError("linear strategy needs a 3-coloring")
    if strategy == ORIENTABLE_4_2 and not (k <= 4 and is_orientable(cp.mesh, cp.colors)):
        raise ValueError("orientable strategy needs an orientable (4-)coloring")
    eng = _Engine(strategy, mode, seed, cache)
    eng.fuel = 200 + 40 * cp.mesh.n_faces
    cp_star, _, _ = _canon(cp)
    root = eng.build(cp_star)
    return ConstructionTree(root, mode, strategy)


def replay(tree: ConstructionTree) -> ColoredPolytope:
    """Rebuild the tree bottom-up; every node is verified against its code."""
    return _replay_node(tree.root, tree.mode)


def _replay_node(node: TreeNode, mode: str) -> ColoredPolytope:
    if node.is_leaf():
        cp = basics.basic_rep(node.leaf, mode)
        if canonical_code_colored(cp.mesh, cp.colors) != node.code:
            raise ReplayError(f"leaf {node.leaf} does not match its recorded code")
        return cp
    children = [_replay_node(c, mode) for c in node.children]
    try:
        got = moves.apply_move(node.move, children)
    except moves.MoveError as exc:
        raise ReplayError(f"illegal move during replay: {exc}") from exc
    got_star, _, _ = _canon(got)
    if canonical_code_colored(got_star.mesh, got_star.colors) != node.code:
        raise ReplayError("replayed node differs from its recorded code")
    return got_star


# -- lemma-gap witness -----------------------------------------------------------


@dataclass(frozen=True)
class GapWitness:
    """A colored mesh where surgery along a non-quadrilateral edge breaks
    3-connectedness although the carrier has no 3-edge cut."""
    cp: ColoredPolytope
    edge: int


def find_lemma_gap_witness(census: Sequence[ColoredPolytope]) -> GapWitness | None:
    """First instance witnessing the gap: the blocked surgery does not imply
    an uncolored decomposition.  The witness is still quasi-decomposable."""
    for cp in census:
        mesh = cp.mesh
        hit = None
        for e in range(mesh.n_edges):
            f1, f3 = mesh.edge_faces(e)
            if mesh.face_degree(f1) < 5 or mesh.face_degree(f3) < 5:
                continue
            f2, f4 = mesh.edge_end_faces(e)
            if cp.colors[f2] != cp.colors[f4]:
                continue
            if not moves.surgery_breaks_connectivity(mesh, e):
                continue
            hit = e
            break
        if hit is None:
            continue
        if mesh.three_edge_cuts():
            continue
        return GapWitness(cp, hit)
    return None


# -- trace files (sct) -----------------------------------------------------------


_TAG_TO_SCRIPT = {
    moves.CONN_SUM: "conn_sum",
    moves.EDGE_SUM: "edge_sum",
    moves.SURGERY: "surgery",
    moves.INVERSE_SURGERY: "inverse_surgery",
    moves.DEHN: "dehn",
    moves.BLOW_UP: "blow_up",
    moves.BLOW_DOWN: "blow_down",
    moves.RECOLOR: "recolor",
    moves.RELAXED_BLOW_UP_P2: "relaxed_blow_up_p2",
    moves.BIGON_BLOW_DOWN: "bigon_blow_down",
    moves.SPLIT_VERTEX_SUM: "split_vertex_sum",
    moves.SPLIT_EDGE_SUM: "split_edge_sum",
}
_SCRIPT_TO_TAG = {v: k for k, v in _TAG_TO_SCRIPT.items()}


def _params_to_text(move: moves.Move) -> str:
    parts = []
    for k, v in move.params:
        if isinstance(v, tuple):
            parts.append(f"{k}={','.join(str(x) for x in v)}")
        else:
            parts.append(f"{k}={v}")
    return " ".join(parts)


def parse_move_line(line: str) -> moves.Move:
    bits = line.split()
    if not bits or bits[0] not in _SCRIPT_TO_TAG:
        raise ValueError(f"unknown move line {line!r}")
    params = {}
    for bit in bits[1:]:
        if "=" not in bit:
            raise ValueError(f"malformed parameter {bit!r}")
        k, v = bit.split("=", 1)
        if "," in v:
            params[k] = tuple(int(x) for x in v.split(","))
        else:
            try:
                params[k] = int(v)
            except ValueError:
                params[k] = v
    return moves.Move.make(_SCRIPT_TO_TAG[bits[0]], **params)


def tree_to_text(tree: ConstructionTree) -> str:
    out = ["%sct 1", f"mode {tree.mode}", f"strategy {tree.strategy}",
           f"target {code_hex(tree.root.code)}"]

    def emit(node: TreeNode, depth: int) -> None:
        pad = "  " * depth
        if node.is_leaf():
            out.append(f"{pad}(basic {node.leaf})")
            return
        out.append(f"{pad}({_TAG_TO_SCRIPT[node.move.tag]} {_params_to_text(node.move)}")
        for c in node.children:
            emit(c, depth + 1)
        out.append(f"{pad})")

    emit(tree.root, 0)
    return "\n".join(out) + "\n"


def tree_from_text(text: str) -> ConstructionTree:
    mode = None
    strategy = GENERAL_4_8
    target = None
    tokens: list[str] = []
    stage = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if stage == 0:
            if line != "%sct 1":
                raise ReplayError(f"line {lineno}: expected '%sct 1'")
            stage = 1
            continue
        if line.startswith("mode "):
            mode = line.split()[1]
            continue
        if line.startswith("strategy "):
            strategy = line.split()[1]
            continue
        if line.startswith("target "):
            target = line.split()[1]
            continue
        tokens.append(line)
    if mode not in (STRICT, RELAXED) or target is None:
        raise ReplayError("missing mode or target header")

    stream = " ".join(tokens)
    pos = 0

    def parse() -> TreeNode:
        nonlocal pos
        while pos < len(stream) and stream[pos].isspace():
            pos += 1
        if pos >= len(stream) or stream[pos] != "(":
            raise ReplayError(f"expected '(' at offset {pos}")
        pos += 1
        head = []
        while pos < len(stream) and stream[pos] not in "()":
            head.append(stream[pos])
            pos += 1
        header = "".join(head).strip()
        children = []
        while True:
            while pos < len(stream) and stream[pos].isspace():
                pos += 1
            if pos >= len(stream):
                raise ReplayError("unbalanced parentheses")
            if stream[pos] == ")":
                pos += 1
                break
            children.append(parse())
        if header.startswith("basic "):
            if children:
                raise ReplayError("leaves take no children")
            name = header.split()[1]
            return TreeNode(None, name, (), b"")
        move = parse_move_line(header)
        return TreeNode(move, None, tuple(children), b"")

    skeleton = parse()
    root = _fill_codes(skeleton, mode)
    if code_hex(root.code) != target:
        raise ReplayError("trace target does not match the replayed tree")
    return ConstructionTree(root, mode, strategy)


def _fill_codes(node: TreeNode, mode: str) -> TreeNode:
    """Recompute per-node codes by replaying bottom-up."""
    if node.leaf is not None:
        cp = basics.basic_rep(node.leaf, mode)
        return TreeNode(None, node.leaf, (),
                        canonical_code_colored(cp.mesh, cp.colors))
    children = tuple(_fill_codes(c, mode) for c in node.children)
    built = [_replay_node(c, mode) for c in children]
    try:
        got = moves.apply_move(node.move, built)
    except moves.MoveError as exc:
        raise ReplayError(f"illegal move in trace: {exc}") from exc
    got_star, _, _ = _canon(got)
    return TreeNode(node.move, None, children,
                    canonical_code_colored(got_star.mesh, got_star.colors))
