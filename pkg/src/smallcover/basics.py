"""Named basic pieces and their identification.

Strict mode: the simplex, the 3-colored cube, and the two non-orientable
prism colorings.  Relaxed mode adds the theta decomposition and the three
bigon-prism colorings.  Representatives are constructed programmatically
(prism classes by enumeration plus invariants, bigon-prism classes through
the surgery identities) and stored as canonical presentations, so
identification is a code lookup.
"""

from __future__ import annotations

from functools import lru_cache

from . import moves
from .canon import canonical_colored_form, canonical_code_colored
from .coloring import ColoredPolytope, enumerate_colorings, is_orientable
from .mesh import RELAXED, STRICT, SphereMesh, cube, prism, simplex, theta

DELTA3 = "delta3"
CUBE_L0 = "cube_l0"
P33_L1 = "p33_l1"
P33_L2 = "p33_l2"
P33_L3 = "p33_l3"  # orientable prism class; decomposable, not basic
THETA = "theta"
P32_L0 = "p32_l0"
P32_L1 = "p32_l1"
P32_L2 = "p32_l2"

STRICT_BASICS = (DELTA3, CUBE_L0, P33_L1, P33_L2)
RELAXED_EXTRAS = (THETA, P32_L0, P32_L1, P32_L2)


def _canonical(cp: ColoredPolytope) -> ColoredPolytope:
    mesh, colors, _, _ = canonical_colored_form(cp.mesh, cp.colors)
    return ColoredPolytope(mesh, colors)


def canonical_cp(cp: ColoredPolytope) -> ColoredPolytope:
    """Public canonical-presentation helper."""
    return _canonical(cp)


def _relaxed(cp: ColoredPolytope) -> ColoredPolytope:
    return ColoredPolytope(SphereMesh(cp.mesh.opp, cp.mesh.nxt, RELAXED), cp.colors)


def _prism_classes() -> dict[str, ColoredPolytope]:
    census = enumerate_colorings(prism(3))
    out = {}
    for rep in census.full_classes:
        orient = is_orientable(prism(3), rep)
        k = len(set(rep))
        if not orient and k == 4:
            out[P33_L1] = ColoredPolytope(prism(3), rep)
        elif not orient and k == 5:
            out[P33_L2] = ColoredPolytope(prism(3), rep)
        else:
            out[P33_L3] = ColoredPolytope(prism(3), rep)
    assert set(out) == {P33_L1, P33_L2, P33_L3}
    return out


@lru_cache(maxsize=None)
def strict_reps() -> dict[str, ColoredPolytope]:
    pr = _prism_classes()
    reps = {
        DELTA3: ColoredPolytope(simplex(), (1, 2, 4, 7)),
        CUBE_L0: ColoredPolytope(cube(), (1, 1, 2, 2, 4, 4)),
        P33_L1: pr[P33_L1],
        P33_L2: pr[P33_L2],
    }
    return {name: _canonical(cp) for name, cp in reps.items()}


@lru_cache(maxsize=None)
def relaxed_reps() -> dict[str, ColoredPolytope]:
    pr = _prism_classes()
    delta_rel = _relaxed(ColoredPolytope(simplex(), (1, 2, 4, 7)))
    cube_rel = _relaxed(ColoredPolytope(cube(), (1, 1, 2, 2, 4, 4)))
    p33l1_rel = _relaxed(pr[P33_L1])

    # bigon-prism colorings through the surgery identities
    mid = _first_surgery(cube_rel)
    p32_l0 = _first_surgery(mid)
    assert p32_l0.mesh.n_faces == 4
    p32_l1 = _first_surgery(p33l1_rel)
    p32_l2 = _first_dehn(delta_rel)

    reps = {
        DELTA3: delta_rel,
        CUBE_L0: cube_rel,
        P33_L1: p33l1_rel,
        P33_L2: _relaxed(pr[P33_L2]),
        THETA: ColoredPolytope(theta(), (1, 2, 4)),
        P32_L0: p32_l0,
        P32_L1: p32_l1,
        P32_L2: p32_l2,
    }
    return {name: _canonical(cp) for name, cp in reps.items()}


def _first_surgery(cp: ColoredPolytope) -> ColoredPolytope:
    for e in range(cp.mesh.n_edges):
        if moves.surgery_legality(cp, e).legal:
            return moves.surgery(cp, e)
    raise ValueError("no legal surgery site")


def _first_dehn(cp: ColoredPolytope) -> ColoredPolytope:
    for e in range(cp.mesh.n_edges):
        if moves.dehn_legality(cp, e).legal:
            return moves.dehn(cp, e)
    raise ValueError("no legal Dehn site")


@lru_cache(maxsize=None)
def _code_table(mode: str) -> dict[bytes, str]:
    reps = strict_reps() if mode == STRICT else relaxed_reps()
    table = {}
    for name, cp in reps.items():
        if mode == STRICT and name not in STRICT_BASICS:
            continue
        table[canonical_code_colored(cp.mesh, cp.colors)] = name
    return table


def identify_basic(cp: ColoredPolytope) -> str | None:
    """Name of the basic piece fully equivalent to cp, or None."""
    # cheap invariant screen before canonicalizing
    if cp.mesh.n_faces > 6:
        return None
    return _code_table(cp.mode).get(canonical_code_colored(cp.mesh, cp.colors))


def basic_rep(name: str, mode: str = STRICT) -> ColoredPolytope:
    reps = strict_reps() if mode == STRICT else relaxed_reps()
    if name not in reps:
        raise KeyError(f"unknown basic piece {name!r} in {mode} mode")
    return reps[name]
