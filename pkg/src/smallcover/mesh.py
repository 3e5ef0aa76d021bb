"""3-valent cell decompositions of the 2-sphere as rotation systems.

A mesh is a pair of permutations on darts (half-edges): `opp` pairs the two
darts of each edge, `nxt` is the counterclockwise rotation at the origin
vertex of each dart.  Vertices are `nxt`-orbits, edges are `opp`-orbits and
faces are orbits of the walk d -> nxt[opp[d]].  Strict mode models simple
3-polytopes (simple, 3-connected, F >= 4); relaxed mode models cell
decompositions of the boundary of the 3-disc (2-edge-connected, bigons and
multi-edges allowed, F >= 3).

Meshes are immutable; every operation builds a fresh mesh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

STRICT = "strict"
RELAXED = "relaxed"


class MeshError(ValueError):
    """Structurally invalid mesh or invalid entity reference."""


class ScpError(ValueError):
    """SCP parse or validation failure; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class ValidationIssue:
    check: str
    ok: bool
    witness: str = ""


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return all(i.ok for i in self.issues)

    def failed(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if not i.ok)

    def __str__(self) -> str:
        lines = [f"mode={self.mode} valid={self.ok}"]
        for i in self.issues:
            mark = "ok  " if i.ok else "FAIL"
            lines.append(f"  [{mark}] {i.check}" + (f": {i.witness}" if i.witness else ""))
        return "\n".join(lines)


class SphereMesh:
    """Immutable rotation system with derived vertex/edge/face structure."""

    __slots__ = (
        "opp", "nxt", "mode", "verts", "faces", "edges",
        "vert_of", "face_of", "edge_of", "_cache",
    )

    def __init__(self, opp: Sequence[int], nxt: Sequence[int], mode: str = STRICT):
        d = len(opp)
        if d == 0 or d % 2:
            raise MeshError("dart count must be positive and even")
        if len(nxt) != d:
            raise MeshError("opp and nxt must have equal length")
        if mode not in (STRICT, RELAXED):
            raise MeshError(f"unknown mode {mode!r}")
        opp = tuple(opp)
        nxt = tuple(nxt)
        if sorted(nxt) != list(range(d)):
            raise MeshError("nxt is not a permutation of the darts")
        for x in range(d):
            o = opp[x]
            if not 0 <= o < d or o == x or opp[o] != x:
                raise MeshError("opp is not a fixed-point-free involution")
        self.opp = opp
        self.nxt = nxt
        self.mode = mode
        self.verts = _orbits(nxt)
        self.faces = _orbits(tuple(nxt[opp[x]] for x in range(d)))
        self.vert_of = _index_of(self.verts, d)
        self.face_of = _index_of(self.faces, d)
        edges = []
        edge_of = [-1] * d
        for x in range(d):
            if x < opp[x]:
                edge_of[x] = edge_of[opp[x]] = len(edges)
                edges.append((x, opp[x]))
        self.edges = tuple(edges)
        self.edge_of = tuple(edge_of)
        self._cache: dict = {}

    # -- basic counts ------------------------------------------------------

    @property
    def n_darts(self) -> int:
        return len(self.opp)

    @property
    def n_verts(self) -> int:
        return len(self.verts)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def __repr__(self) -> str:
        return f"SphereMesh(F={self.n_faces}, E={self.n_edges}, V={self.n_verts}, {self.mode})"

    # -- local queries -----------------------------------------------------

    def face_degree(self, f: int) -> int:
        return len(self.faces[f])

    def face_neighbors(self, f: int) -> tuple[int, ...]:
        """Faces across each boundary edge of f, in boundary order."""
        return tuple(self.face_of[self.opp[d]] for d in self.faces[f])

    def edge_faces(self, e: int) -> tuple[int, int]:
        """The two faces containing edge e (F1, F3 in surgery terms)."""
        d, d2 = self.edges[e]
        return self.face_of[d], self.face_of[d2]

    def edge_end_faces(self, e: int) -> tuple[int, int]:
        """The third face at each endpoint of e (F2, F4 in surgery terms)."""
        d, d2 = self.edges[e]
        n = self.nxt
        return self.face_of[n[n[d]]], self.face_of[n[n[d2]]]

    def edge_verts(self, e: int) -> tuple[int, int]:
        d, d2 = self.edges[e]
        return self.vert_of[d], self.vert_of[d2]

    def vertex_faces(self, v: int) -> tuple[int, ...]:
        return tuple(self.face_of[d] for d in self.verts[v])

    def vertex_edges(self, v: int) -> tuple[int, ...]:
        return tuple(self.edge_of[d] for d in self.verts[v])

    def face_verts(self, f: int) -> tuple[int, ...]:
        return tuple(self.vert_of[d] for d in self.faces[f])

    def face_edges(self, f: int) -> tuple[int, ...]:
        return tuple(self.edge_of[d] for d in self.faces[f])

    def edges_adjacent(self, e1: int, e2: int) -> bool:
        """True when the two edges share a vertex."""
        a, b = self.edge_verts(e1)
        c, d = self.edge_verts(e2)
        return a in (c, d) or b in (c, d)

    def faces_adjacent(self, f: int, g: int) -> bool:
        return g in self.face_neighbors(f)

    def small_faces(self) -> tuple[int, ...]:
        """Faces with at most five boundary edges (always nonempty)."""
        return tuple(f for f in range(self.n_faces) if len(self.faces[f]) <= 5)

    # -- validation --------------------------------------------------------

    def validate(self) -> ValidationReport:
        issues = [ValidationIssue("involution", True)]  # enforced at construction

        bad_v = [v for v, orbit in enumerate(self.verts) if len(orbit) != 3]
        issues.append(ValidationIssue(
            "three_valent", not bad_v,
            f"vertex {bad_v[0]} has degree {len(self.verts[bad_v[0]])}" if bad_v else ""))

        issues.append(ValidationIssue("connected", self._connected(), ""))

        euler = self.n_verts - self.n_edges + self.n_faces
        issues.append(ValidationIssue("sphere_euler", euler == 2, f"V-E+F={euler}"))

        loops = [e for e in range(self.n_edges)
                 if self.vert_of[self.edges[e][0]] == self.vert_of[self.edges[e][1]]]
        issues.append(ValidationIssue(
            "no_loops", not loops, f"edge {loops[0]}" if loops else ""))

        if self.mode == STRICT:
            issues.append(ValidationIssue(
                "min_faces", self.n_faces >= 4, f"F={self.n_faces}"))
            seen: dict[tuple[int, int], int] = {}
            multi = ""
            for e in range(self.n_edges):
                key = tuple(sorted(self.edge_verts(e)))
                if key in seen:
                    multi = f"edges {seen[key]} and {e}"
                    break
                seen[key] = e
            issues.append(ValidationIssue("simple", not multi, multi))
            if not multi and not loops and not bad_v:
                ok, witness = self._three_connected()
                issues.append(ValidationIssue("three_connected", ok, witness))
            else:
                issues.append(ValidationIssue("three_connected", False, "skipped: not simple"))
        else:
            issues.append(ValidationIssue(
                "min_faces", self.n_faces >= 3, f"F={self.n_faces}"))
            bridges = [e for e in range(self.n_edges)
                       if self.face_of[self.edges[e][0]] == self.face_of[self.edges[e][1]]]
            issues.append(ValidationIssue(
                "two_edge_connected", not bridges,
                f"bridge edge {bridges[0]}" if bridges else ""))

        return ValidationReport(self.mode, tuple(issues))

    def check_valid(self) -> None:
        report = self.validate()
        if not report.ok:
            raise MeshError("invalid mesh: " + "; ".join(
                f"{i.check} ({i.witness})" if i.witness else i.check
                for i in report.failed()))

    def _connected(self) -> bool:
        d = self.n_darts
        seen = [False] * d
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            x = stack.pop()
            for y in (self.opp[x], self.nxt[x]):
                if not seen[y]:
                    seen[y] = True
                    count += 1
                    stack.append(y)
        return count == d

    def _adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_verts)]
        for d, d2 in self.edges:
            u, w = self.vert_of[d], self.vert_of[d2]
            adj[u].append(w)
            adj[w].append(u)
        return adj

    def _three_connected(self) -> tuple[bool, str]:
        """Brute-force vertex-pair deletion; fine at desk scale."""
        n = self.n_verts
        if n < 4:
            return False, f"only {n} vertices"
        adj = self._adjacency()
        for u in range(n):
            for v in range(u + 1, n):
                if not _connected_without(adj, n, (u, v)):
                    return False, f"cut pair ({u}, {v})"
        return True, ""

    # -- 3-edge cuts -------------------------------------------------------

    def three_edge_cuts(self) -> tuple["EdgeCut3", ...]:
        """All pairwise non-adjacent edge triples that disconnect the skeleton.

        Triples meeting at a vertex are never produced (they are pairwise
        adjacent); each cut carries the 3-face belt and the face bipartition.
        """
        cached = self._cache.get("cuts")
        if cached is not None:
            return cached
        cuts = []
        ne = self.n_edges
        everts = [self.edge_verts(e) for e in range(ne)]
        for e1 in range(ne):
            a1 = everts[e1]
            for e2 in range(e1 + 1, ne):
                a2 = everts[e2]
                if a1[0] in a2 or a1[1] in a2:
                    continue
                for e3 in range(e2 + 1, ne):
                    a3 = everts[e3]
                    if a1[0] in a3 or a1[1] in a3 or a2[0] in a3 or a2[1] in a3:
                        continue
                    cut = self._try_cut((e1, e2, e3))
                    if cut is not None:
                        cuts.append(cut)
        out = tuple(cuts)
        self._cache["cuts"] = out
        return out

    def _try_cut(self, triple: tuple[int, int, int]) -> "EdgeCut3 | None":
        banned = set(triple)
        n = self.n_verts
        comp = [-1] * n
        adj: list[list[int]] = [[] for _ in range(n)]
        for e, (d, d2) in enumerate(self.edges):
            if e in banned:
                continue
            u, w = self.vert_of[d], self.vert_of[d2]
            adj[u].append(w)
            adj[w].append(u)
        n_comp = 0
        for start in range(n):
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
            return None
        belt = set()
        for e in triple:
            d, d2 = self.edges[e]
            belt.add(self.face_of[d])
            belt.add(self.face_of[d2])
        if len(belt) != 3:
            return None
        side_a = []
        side_b = []
        for f in range(self.n_faces):
            if f in belt:
                continue
            sides = {comp[v] for v in self.face_verts(f)}
            if len(sides) != 1:
                return None
            (side_a if 0 in sides else side_b).append(f)
        return EdgeCut3(triple, tuple(sorted(belt)), tuple(side_a), tuple(side_b))

    # -- dot export (plumbing, untested against anything upstream) ---------

    def to_dot(self) -> str:
        lines = ["graph skeleton {"]
        for e in range(self.n_edges):
            u, w = self.edge_verts(e)
            lines.append(f"  v{u} -- v{w} [label=e{e}];")
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class EdgeCut3:
    """A non-trivial 3-edge cut: pairwise non-adjacent, disconnecting.

    `belt` is the triple of faces crossed by the cut; `side_a`/`side_b`
    partition the remaining faces.
    """
    edges: tuple[int, int, int]
    belt: tuple[int, int, int]
    side_a: tuple[int, ...]
    side_b: tuple[int, ...]


def _orbits(perm: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    n = len(perm)
    seen = [False] * n
    orbits = []
    for start in range(n):
        if seen[start]:
            continue
        orbit = []
        x = start
        while not seen[x]:
            seen[x] = True
            orbit.append(x)
            x = perm[x]
        orbits.append(tuple(orbit))
    return tuple(orbits)


def _index_of(orbits: tuple[tuple[int, ...], ...], n: int) -> tuple[int, ...]:
    idx = [-1] * n
    for i, orbit in enumerate(orbits):
        for x in orbit:
            idx[x] = i
    return tuple(idx)


def _connected_without(adj: list[list[int]], n: int, removed: tuple[int, ...]) -> bool:
    skip = set(removed)
    start = next(v for v in range(n) if v not in skip)
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen and y not in skip:
                seen.add(y)
                stack.append(y)
    return len(seen) == n - len(skip)


# -- construction from face descriptions ------------------------------------


def mesh_from_face_cycles(face_cycles: Sequence[Sequence[int]], mode: str = STRICT) -> SphereMesh:
    """Build a mesh from faces given as cyclic vertex lists.

    Faces must be consistently oriented: every directed edge (u, v) appears
    in exactly one face.  Only usable for simple graphs (no multi-edges);
    relaxed specials are built at dart level instead.
    """
    darts: list[tuple[int, int]] = []  # (u, v) per dart
    cycles_as_darts: list[list[int]] = []
    for cyc in face_cycles:
        ids = []
        k = len(cyc)
        for i in range(k):
            ids.append(len(darts))
            darts.append((cyc[i], cyc[(i + 1) % k]))
        cycles_as_darts.append(ids)
    by_pair = {}
    for i, uv in enumerate(darts):
        if uv in by_pair:
            raise MeshError(f"directed edge {uv} appears twice; orientation inconsistent")
        by_pair[uv] = i
    opp = [-1] * len(darts)
    for i, (u, v) in enumerate(darts):
        j = by_pair.get((v, u))
        if j is None:
            raise MeshError(f"directed edge {(v, u)} missing; not a closed surface")
        opp[i] = j
    return _mesh_from_dart_cycles(cycles_as_darts, opp, mode)


def _mesh_from_dart_cycles(cycles: Sequence[Sequence[int]], opp: Sequence[int],
                           mode: str) -> SphereMesh:
    """Mesh from faces as dart cycles plus the opp involution: nxt = phi o opp."""
    n = len(opp)
    succ = [-1] * n
    for cyc in cycles:
        for i, d in enumerate(cyc):
            succ[d] = cyc[(i + 1) % len(cyc)]
    nxt = [succ[opp[d]] for d in range(n)]
    return SphereMesh(opp, nxt, mode)


def simplex() -> SphereMesh:
    """The tetrahedron; faces numbered 0..3, face i omits vertex 3-i... (fixed ids)."""
    return mesh_from_face_cycles([(0, 1, 2), (0, 3, 1), (1, 3, 2), (0, 2, 3)])


def cube() -> SphereMesh:
    """The 3-cube.  Faces ordered [bottom, top, front, back, right, left];
    opposite pairs are (0,1), (2,3), (4,5)."""
    return mesh_from_face_cycles([
        (0, 3, 2, 1),      # bottom
        (4, 5, 6, 7),      # top
        (0, 1, 5, 4),      # front
        (2, 3, 7, 6),      # back
        (1, 2, 6, 5),      # right
        (3, 0, 4, 7),      # left
    ])


def prism(n: int, mode: str | None = None) -> SphereMesh:
    """The n-gonal prism; faces ordered [top, bottom, side_0..side_{n-1}].

    prism(2) is the bigon prism and exists only in relaxed mode.
    """
    if n < 2:
        raise MeshError("prism needs n >= 2")
    if n == 2:
        if mode == STRICT:
            raise MeshError("prism(2) is not simple; relaxed mode only")
        return _prism2()
    top = tuple(range(n))
    bottom = tuple(range(2 * n - 1, n - 1, -1))
    sides = []
    for i in range(n):
        j = (i + 1) % n
        sides.append((j, i, n + i, n + j))
    return mesh_from_face_cycles([top, bottom, *sides], mode or STRICT)


def _prism2() -> SphereMesh:
    # darts laid out face by face so the derived face order is
    # [top, bottom, side_0, side_1]; edges: t0=(0,4) t1=(1,9) b1=(2,11)
    # b0=(3,6) v0=(5,8) v1=(7,10)
    opp = [4, 9, 11, 6, 0, 8, 3, 10, 5, 1, 7, 2]
    cycles = [
        (0, 1),            # top bigon: t0+, t1-
        (2, 3),            # bottom bigon: b1+, b0-
        (4, 5, 6, 7),      # side_0: t0-, v0+, b0+, v1-
        (8, 9, 10, 11),    # side_1: v0-, t1+, v1+, b1-
    ]
    return _mesh_from_dart_cycles(cycles, opp, RELAXED)


def theta() -> SphereMesh:
    """The theta decomposition: 2 vertices, 3 edges, 3 lune faces (relaxed)."""
    opp = [1, 0, 3, 2, 5, 4]
    nxt = [2, 5, 4, 1, 0, 3]
    return SphereMesh(opp, nxt, RELAXED)


# -- SCP text format ---------------------------------------------------------


def from_scp(text: str, require_valid: bool = True
             ) -> tuple[SphereMesh, tuple[int, ...] | None]:
    """Parse SCP text into a validated mesh and optional face coloring.

    With require_valid=False the structural validation gate is skipped so a
    report can be produced for a broken file.
    """
    mode = None
    counts = None
    e_lines: list[tuple[int, int, int, int]] = []
    v_lines: list[tuple[int, tuple[int, int, int], int]] = []
    c_lines: list[tuple[int, int, int]] = []
    stage = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if stage == 0:
            if parts != ["%scp", "1"]:
                raise ScpError("expected header '%scp 1'", lineno)
            stage = 1
            continue
        if stage == 1:
            if len(parts) != 2 or parts[0] != "mode" or parts[1] not in (STRICT, RELAXED):
                raise ScpError("expected 'mode strict' or 'mode relaxed'", lineno)
            mode = parts[1]
            stage = 2
            continue
        if stage == 2:
            if len(parts) != 4 or parts[0] != "counts":
                raise ScpError("expected 'counts F E V'", lineno)
            try:
                counts = tuple(int(p) for p in parts[1:])
            except ValueError:
                raise ScpError("counts must be integers", lineno)
            stage = 3
            continue
        kind = parts[0]
        try:
            nums = [int(p) for p in parts[1:]]
        except ValueError:
            raise ScpError(f"non-integer field in '{kind}' record", lineno)
        if kind == "e":
            if len(nums) != 3:
                raise ScpError("edge record needs 'e <id> <faceL> <faceR>'", lineno)
            e_lines.append((nums[0], nums[1], nums[2], lineno))
        elif kind == "v":
            if len(nums) != 4:
                raise ScpError("vertex record needs 'v <id> <e1> <e2> <e3>'", lineno)
            v_lines.append((nums[0], (nums[1], nums[2], nums[3]), lineno))
        elif kind == "c":
            if len(nums) != 2:
                raise ScpError("color record needs 'c <face> <color>'", lineno)
            c_lines.append((nums[0], nums[1], lineno))
        else:
            raise ScpError(f"unknown record kind {kind!r}", lineno)
    if counts is None or mode is None:
        raise ScpError("missing header, mode or counts")
    nf, ne, nv = counts
    if sorted(e[0] for e in e_lines) != list(range(ne)):
        raise ScpError(f"edge ids must be dense 0..{ne - 1}")
    if sorted(v[0] for v in v_lines) != list(range(nv)):
        raise ScpError(f"vertex ids must be dense 0..{nv - 1}")

    # dart 2e / 2e+1 = first / second occurrence of edge e in vertex records
    slot_count = [0] * ne
    nxt = [-1] * (2 * ne)
    v_lines.sort()
    for vid, edges_ccw, lineno in v_lines:
        darts_here = []
        for e in edges_ccw:
            if not 0 <= e < ne:
                raise ScpError(f"vertex {vid} references unknown edge {e}", lineno)
            if slot_count[e] >= 2:
                raise ScpError(f"edge {e} incident to more than two dart slots", lineno)
            darts_here.append(2 * e + slot_count[e])
            slot_count[e] += 1
        for i, d in enumerate(darts_here):
            nxt[d] = darts_here[(i + 1) % 3]
    if any(c != 2 for c in slot_count):
        e_bad = slot_count.index(min(slot_count))
        raise ScpError(f"edge {e_bad} does not appear exactly twice in vertex records")
    opp = [d ^ 1 for d in range(2 * ne)]
    mesh = SphereMesh(opp, nxt, mode)
    if mesh.n_faces != nf or mesh.n_verts != nv:
        raise ScpError(
            f"counts mismatch: declared F={nf} V={nv}, derived F={mesh.n_faces} V={mesh.n_verts}")

    # match declared faceL/faceR against derived faces
    file_to_face: dict[int, int] = {}
    for eid, fl, fr, lineno in e_lines:
        derived = (mesh.face_of[2 * eid], mesh.face_of[2 * eid + 1])
        for file_id, got in zip((fl, fr), derived):
            if not 0 <= file_id < nf:
                raise ScpError(f"face id {file_id} out of range", lineno)
            prev = file_to_face.setdefault(file_id, got)
            if prev != got:
                raise ScpError(f"face id {file_id} is inconsistent across edge records", lineno)
    if len(file_to_face) != nf or len(set(file_to_face.values())) != nf:
        raise ScpError("edge records do not define a bijection onto the derived faces")

    if require_valid:
        report = mesh.validate()
        if not report.ok:
            bad = report.failed()[0]
            detail = f" ({bad.witness})" if bad.witness else ""
            if bad.check == "simple":
                raise ScpError(f"simplicity violated{detail}")
            raise ScpError(f"validation failed: {bad.check}{detail}")

    colors = None
    if c_lines:
        colors_list = [-1] * nf
        for file_id, col, lineno in c_lines:
            if file_id not in file_to_face:
                raise ScpError(f"color for unknown face {file_id}", lineno)
            if not 1 <= col <= 7:
                raise ScpError(f"color {col} outside 1..7", lineno)
            colors_list[file_to_face[file_id]] = col
        if -1 in colors_list:
            raise ScpError("coloring must cover every face")
        colors = tuple(colors_list)
    return mesh, colors


def to_scp(mesh: SphereMesh, colors: Sequence[int] | None = None,
           comment: str | None = None) -> str:
    """Serialize a mesh (and optional coloring) in canonical id order."""
    out = ["%scp 1"]
    if comment:
        for line in comment.splitlines():
            out.append(f"# {line}")
    out.append(f"mode {mesh.mode}")
    out.append(f"counts {mesh.n_faces} {mesh.n_edges} {mesh.n_verts}")
    # dart 2e must be the first occurrence in vertex-record order
    first_slot = {}
    for v in range(mesh.n_verts):
        for d in mesh.verts[v]:
            e = mesh.edge_of[d]
            if e not in first_slot:
                first_slot[e] = d
    for e in range(mesh.n_edges):
        d = first_slot[e]
        out.append(f"e {e} {mesh.face_of[d]} {mesh.face_of[mesh.opp[d]]}")
    for v in range(mesh.n_verts):
        es = " ".join(str(mesh.edge_of[d]) for d in mesh.verts[v])
        out.append(f"v {v} {es}")
    if colors is not None:
        for f in range(mesh.n_faces):
            out.append(f"c {f} {colors[f]}")
    return "\n".join(out) + "\n"
