"""GF(2)^3 linear algebra on 3-bit integers.

Colors of faces are nonzero elements of (Z_2)^3 encoded as integers 1..7
with the basis fixed once and for all: a = 1, b = 2, c = 4.  Addition is
bitwise XOR.  Elements of GL(3, Z_2) are encoded as lookup tables over
0..7, built from the images of the three basis vectors.
"""

from __future__ import annotations

from typing import Iterable, Sequence

BASIS = (1, 2, 4)
NONZERO = (1, 2, 3, 4, 5, 6, 7)


def rank(vecs: Iterable[int]) -> int:
    """GF(2) rank of a set of vectors in 0..7 (Gaussian elimination on bits)."""
    basis: list[int] = []
    for v in vecs:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
            basis.sort(reverse=True)
    return len(basis)


def span(vecs: Iterable[int]) -> frozenset[int]:
    """All GF(2) combinations of the given vectors (includes 0)."""
    out = {0}
    for v in vecs:
        out |= {v ^ w for w in out}
    return frozenset(out)


def independent3(a: int, b: int, c: int) -> bool:
    """True iff {a, b, c} is a basis of (Z_2)^3."""
    # rank 3 <=> all nonzero, pairwise distinct, and c outside span{a, b}
    return a != 0 and b != 0 and a != b and c not in (0, a, b, a ^ b)


def theta_from_basis_images(im1: int, im2: int, im4: int) -> tuple[int, ...] | None:
    """Lookup table of the linear map sending 1, 2, 4 to the given images.

    Returns None when the images are dependent (the map is singular).
    """
    if not independent3(im1, im2, im4):
        return None
    table = [0] * 8
    for v in range(8):
        w = 0
        if v & 1:
            w ^= im1
        if v & 2:
            w ^= im2
        if v & 4:
            w ^= im4
        table[v] = w
    return tuple(table)


def _all_gl3() -> tuple[tuple[int, ...], ...]:
    mats = []
    for i1 in NONZERO:
        for i2 in NONZERO:
            for i4 in NONZERO:
                t = theta_from_basis_images(i1, i2, i4)
                if t is not None:
                    mats.append(t)
    return tuple(mats)


#: All 168 invertible linear maps on (Z_2)^3, as lookup tables over 0..7.
GL3 = _all_gl3()

assert len(GL3) == (8 - 1) * (8 - 2) * (8 - 4), "GL(3,2) must have 168 elements"


def theta_mapping(sources: Sequence[int], targets: Sequence[int]) -> tuple[int, ...] | None:
    """The unique theta in GL(3,2) with theta(sources[i]) = targets[i], if any.

    `sources` must be a basis; returns None when it is not, or when the
    induced linear map is singular or inconsistent.
    """
    if rank(sources) != 3 or len(sources) != len(targets):
        return None
    # express 1,2,4 in terms of the source basis, then push through targets
    ims = []
    for unit in BASIS:
        coeff = _coords(unit, sources)
        if coeff is None:
            return None
        im = 0
        for k, t in zip(coeff, targets):
            if k:
                im ^= t
        ims.append(im)
    theta = theta_from_basis_images(*ims)
    if theta is None:
        return None
    for s, t in zip(sources, targets):
        if theta[s] != t:
            return None
    return theta


def _coords(v: int, basis: Sequence[int]) -> tuple[int, ...] | None:
    for bits in range(1 << len(basis)):
        w = 0
        for i, b in enumerate(basis):
            if bits >> i & 1:
                w ^= b
        if w == v:
            return tuple(bits >> i & 1 for i in range(len(basis)))
    return None


def apply_theta(theta: Sequence[int], colors: Sequence[int]) -> tuple[int, ...]:
    return tuple(theta[c] for c in colors)


def theta_inverse(theta: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * 8
    for v in range(8):
        inv[theta[v]] = v
    return tuple(inv)


def theta_compose(outer: Sequence[int], inner: Sequence[int]) -> tuple[int, ...]:
    """outer o inner as lookup tables."""
    return tuple(outer[inner[v]] for v in range(8))


def min_over_gl(colors: Sequence[int]) -> tuple[int, ...]:
    """Lexicographically least GL(3,2)-image of a color tuple."""
    return min(apply_theta(t, colors) for t in GL3)
