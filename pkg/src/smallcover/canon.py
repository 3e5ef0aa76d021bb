"""Canonical forms for meshes and colored meshes.

Uncolored code: minimum over all start darts and both global orientations of
a breadth-first relabeling string of (rotation, opp).  For 3-connected planar
graphs this decides combinatorial equivalence (Whitney); in relaxed mode it
decides rotation-system equivalence, which is the data we store.

Colored codes append the face-color tuple read in canonical face order,
minimized over the mesh's minimal relabelings and (for the full relation)
over GL(3, Z_2).  D-J codes fix the traversal to the first minimal
relabeling and minimize over GL(3, Z_2) only.

Canonical presentations: `canonical_colored_form` relabels darts by the
minimizing labeling (reflecting when that labeling reverses orientation) and
applies the minimizing theta, so fully-equivalent inputs become bit-identical
objects.  Dart/edge/face ids of a canonical presentation therefore serve as
canonical labels in move scripts and traces.
"""

from __future__ import annotations

from typing import Sequence

from . import gf2
from .mesh import SphereMesh

FULL = "full"
DJ = "dj"


def _labeling_code(mesh: SphereMesh, start: int, reverse: bool,
                   best: list[int] | None) -> tuple[list[int], list[int]] | None:
    """BFS relabeling from (start, orientation); None when worse than best.

    Returns (code, order) where order[new_label] = old dart and the code is
    the flattened (rotation_label, opp_label) table in new-label order.
    """
    opp = mesh.opp
    sigma = mesh.nxt if not reverse else _sigma_rev(mesh)
    n = mesh.n_darts
    label = [-1] * n
    order = [start]
    label[start] = 0
    code: list[int] = []
    i = 0
    while i < len(order):
        x = order[i]
        for y in (sigma[x], opp[x]):
            if label[y] < 0:
                label[y] = len(order)
                order.append(y)
            code.append(label[y])
            if best is not None:
                k = len(code) - 1
                c = code[k] - best[k]
                if c > 0:
                    return None
                if c < 0:
                    best = None  # strictly better; stop comparing
        i += 1
    return code, order


def _sigma_rev(mesh: SphereMesh) -> list[int]:
    sigma = mesh._cache.get("sigma_rev")
    if sigma is None:
        sigma = [0] * mesh.n_darts
        for d in range(mesh.n_darts):
            sigma[mesh.nxt[d]] = d
        mesh._cache["sigma_rev"] = sigma
    return sigma


def _best_labelings(mesh: SphereMesh) -> tuple[list[int], list[tuple[list[int], bool]]]:
    """Minimal code plus every (dart order, reversed) pair achieving it."""
    cached = mesh._cache.get("labelings")
    if cached is not None:
        return cached
    best: list[int] | None = None
    found: list[tuple[list[int], bool]] = []
    for reverse in (False, True):
        for start in range(mesh.n_darts):
            got = _labeling_code(mesh, start, reverse, best)
            if got is None:
                continue
            code, order = got
            if best is None or code < best:
                best = code
                found = [(order, reverse)]
            elif code == best:
                found.append((order, reverse))
    assert best is not None
    mesh._cache["labelings"] = (best, found)
    return best, found


def canonical_code(mesh: SphereMesh) -> bytes:
    """Canonical byte string of the uncolored mesh (reflection allowed)."""
    cached = mesh._cache.get("canon")
    if cached is not None:
        return cached
    best, _ = _best_labelings(mesh)
    head = bytes((1 if mesh.mode == "strict" else 2,))
    if mesh.n_darts < 255:
        out = head + b"\x01" + bytes(best)
    else:
        out = head + b"\x02" + b"".join(v.to_bytes(2, "big") for v in best)
    mesh._cache["canon"] = out
    return out


def _face_sequence(mesh: SphereMesh, order: list[int], reverse: bool) -> tuple[int, ...]:
    """Original face ids in canonical order for one labeling.

    A reversed labeling presents the mirror mesh, whose face through dart d
    is the original face through opp[d].
    """
    face_of = mesh.face_of
    opp = mesh.opp
    out = []
    taken = set()
    for d in order:
        f = face_of[opp[d]] if reverse else face_of[d]
        if f not in taken:
            taken.add(f)
            out.append(f)
    return tuple(out)


def canonical_face_orders(mesh: SphereMesh) -> list[tuple[int, ...]]:
    """Distinct canonical face sequences, one per minimal relabeling."""
    cached = mesh._cache.get("face_orders")
    if cached is not None:
        return cached
    _, found = _best_labelings(mesh)
    face_orders = []
    seen = set()
    for order, rev in found:
        key = _face_sequence(mesh, order, rev)
        if key not in seen:
            seen.add(key)
            face_orders.append(key)
    mesh._cache["face_orders"] = face_orders
    return face_orders


def canonical_code_colored(mesh: SphereMesh, colors: Sequence[int],
                           relation: str = FULL) -> bytes:
    """Code deciding colored equivalence (relation 'full') or D-J ('dj')."""
    key = ("ccc", tuple(colors), relation)
    cached = mesh._cache.get(key)
    if cached is not None:
        return cached
    base = canonical_code(mesh)
    if relation == FULL:
        best = None
        for face_order in canonical_face_orders(mesh):
            tup = tuple(colors[f] for f in face_order)
            cand = gf2.min_over_gl(tup)
            if best is None or cand < best:
                best = cand
    elif relation == DJ:
        face_order = canonical_face_orders(mesh)[0]
        best = gf2.min_over_gl(tuple(colors[f] for f in face_order))
    else:
        raise ValueError(f"unknown relation {relation!r}")
    out = base + b"|" + bytes(best)
    mesh._cache[key] = out
    return out


def _relabeled(mesh: SphereMesh, order: list[int], reverse: bool
               ) -> tuple[SphereMesh, tuple[int, ...]]:
    sigma = mesh.nxt if not reverse else _sigma_rev(mesh)
    inv = [0] * mesh.n_darts
    for new, old in enumerate(order):
        inv[old] = new
    opp = [inv[mesh.opp[old]] for old in order]
    nxt = [inv[sigma[old]] for old in order]
    return SphereMesh(opp, nxt, mesh.mode), tuple(inv)


def canonical_mesh_form(mesh: SphereMesh) -> tuple[SphereMesh, tuple[int, ...]]:
    """Relabel (and reflect if the minimal labeling does) to canonical form.

    Isomorphic meshes yield bit-identical arrays; dart ids of the result are
    its canonical labels.  Returns (mesh*, old->new dart map).
    """
    _, found = _best_labelings(mesh)
    order, rev = found[0]
    return _relabeled(mesh, order, rev)


def canonical_colored_form(mesh: SphereMesh, colors: Sequence[int]
                           ) -> tuple[SphereMesh, tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Canonical presentation of a colored mesh.

    Among minimal relabelings and theta in GL(3,2), applies the pair with the
    least relabeled color tuple.  Fully-equivalent colored meshes produce
    bit-identical (mesh*, colors*).  Returns (mesh*, colors*, dart map, theta).
    """
    _, found = _best_labelings(mesh)
    best = None
    for idx, (order, rev) in enumerate(found):
        tup = tuple(colors[f] for f in _face_sequence(mesh, order, rev))
        for theta in gf2.GL3:
            cand = gf2.apply_theta(theta, tup)
            if best is None or cand < best[0]:
                best = (cand, idx, theta)
    assert best is not None
    new_colors, idx, theta = best
    order, rev = found[idx]
    new_mesh, inv = _relabeled(mesh, order, rev)
    return new_mesh, tuple(new_colors), inv, theta


def code_hex(code: bytes) -> str:
    return code.hex()


def are_isomorphic(a: SphereMesh, b: SphereMesh) -> bool:
    if a.mode != b.mode:
        raise ValueError("mode mismatch: cannot compare strict with relaxed")
    return canonical_code(a) == canonical_code(b)
