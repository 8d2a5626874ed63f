"""Interpolation operators that move dual samples onto common grid locations.

Each pixel ``(i, j)`` owns four sample sites:

* ``CENTER``    the pixel centre ``(i, j)``
* ``UPDOWN``    the midpoint of the edge shared with the pixel below, ``(i+1/2, j)``
* ``LEFTRIGHT`` the midpoint of the edge shared with the pixel to the right, ``(i, j+1/2)``
* ``PLUS``      the lower-right vertex, ``(i+1/2, j+1/2)``

A four-channel dual field ``u`` carries one channel per difference
direction, and each channel lives where its difference lives: channel 0 on
``UPDOWN`` sites, channel 1 on ``LEFTRIGHT`` sites, channel 2 on ``PLUS``
sites, and channel 3 (the ``(-1, 1)`` diagonal) on the upper-right vertex
``(i-1/2, j+1/2)``. ``L_star`` averages neighbouring samples of each channel
so that all four outputs refer to the ``star`` site of the pixel.

Three stencil variants are available:

``"aligned"`` (default)
    every average is centred on the target site given the channel locations
    above.
``"printed"``
    the published stencils verbatim. Channel 3 is read one row up and one
    column right of its aligned position, and channel 2 of ``L_updown`` and
    ``L_leftright`` average along the other axis.
``"printed-noshift"``
    as ``"printed"`` but ``(L_plus u)_3(i, j) = u_3(i, j)`` instead of
    ``u_3(i, j+1)``.

Out-of-grid references read as zero, and dual entries at positions where the
matching difference is structurally zero are pinned to zero before
averaging. Adjoints are transposes of the assembled sparse matrices.
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .diffops import d2_mask, d4_mask, diff4_op, gradient_op
from .grid import GridError, as_field, as_image
from .linop import GridOperator, Term, assemble

__all__ = [
    "StarTag",
    "VARIANTS",
    "CONDAT_STARS",
    "l_star_op",
    "l_condat_op",
    "apply_L",
    "apply_L_adjoint",
    "apply_L_condat",
    "apply_L_condat_adjoint",
    "stacked_l_op",
    "big_l_op",
    "assemble_big_L",
    "big_L_adjoint",
]


class StarTag(str, enum.Enum):
    UPDOWN = "updown"
    LEFTRIGHT = "leftright"
    CENTER = "center"
    PLUS = "plus"


STARS = (StarTag.UPDOWN, StarTag.LEFTRIGHT, StarTag.CENTER, StarTag.PLUS)
CONDAT_STARS = (StarTag.UPDOWN, StarTag.LEFTRIGHT, StarTag.CENTER)


def _avg(k: int, offsets) -> list[Term]:
    w = 1.0 / len(offsets)
    return [(k, k, di, dj, w) for di, dj in offsets]


VARIANTS = ("aligned", "printed", "printed-noshift")


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"stencil variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def _l4_terms(star: StarTag, variant: str) -> list[Term]:
    aligned = variant == "aligned"
    if star is StarTag.UPDOWN:
        return (_avg(0, [(0, 0)])
                + _avg(1, [(0, 0), (0, -1), (1, 0), (1, -1)])
                + _avg(2, [(0, 0), (0, -1)] if aligned else [(0, 0), (-1, 0)])
                + _avg(3, [(1, 0), (1, -1)] if aligned else [(0, 0), (0, 1)]))
    if star is StarTag.LEFTRIGHT:
        return (_avg(0, [(0, 0), (-1, 0), (0, 1), (-1, 1)])
                + _avg(1, [(0, 0)])
                + _avg(2, [(0, 0), (-1, 0)] if aligned else [(0, 0), (0, -1)])
                + _avg(3, [(0, 0), (1, 0)] if aligned else [(0, 1), (-1, 1)]))
    if star is StarTag.CENTER:
        return (_avg(0, [(0, 0), (-1, 0)])
                + _avg(1, [(0, 0), (0, -1)])
                + _avg(2, [(0, 0), (0, -1), (-1, 0), (-1, -1)])
                + _avg(3, [(0, 0), (1, 0), (0, -1), (1, -1)] if aligned
                       else [(0, 0), (-1, 0), (0, 1), (-1, 1)]))
    if star is StarTag.PLUS:
        last = {"aligned": (1, 0), "printed": (0, 1), "printed-noshift": (0, 0)}[variant]
        return (_avg(0, [(0, 0), (0, 1)])
                + _avg(1, [(0, 0), (1, 0)])
                + _avg(2, [(0, 0)])
                + _avg(3, [last]))
    raise ValueError(f"unknown star {star!r}")


def _l2_terms(star: StarTag) -> list[Term]:
    if star is StarTag.UPDOWN:
        return _avg(0, [(0, 0)]) + _avg(1, [(0, 0), (0, -1), (1, 0), (1, -1)])
    if star is StarTag.LEFTRIGHT:
        return _avg(0, [(0, 0), (-1, 0), (0, 1), (-1, 1)]) + _avg(1, [(0, 0)])
    if star is StarTag.CENTER:
        return _avg(0, [(0, 0), (-1, 0)]) + _avg(1, [(0, 0), (0, -1)])
    raise ValueError(f"the two-channel family has no {star!r} operator")


@lru_cache(maxsize=None)
def l_star_op(star: StarTag, n1: int, n2: int, variant: str = "aligned") -> GridOperator:
    """Four-channel interpolation operator for ``star`` on an ``n1 x n2`` grid."""
    star = StarTag(star)
    return assemble(_l4_terms(star, _check_variant(variant)), n1, n2, 4, 4,
                    in_mask=d4_mask(n1, n2), name=f"L_{star.value}")


@lru_cache(maxsize=None)
def l_condat_op(star: StarTag, n1: int, n2: int) -> GridOperator:
    """Two-channel interpolation operator of the Condat TV."""
    star = StarTag(star)
    return assemble(_l2_terms(star), n1, n2, 2, 2,
                    in_mask=d2_mask(n1, n2), name=f"Lc_{star.value}")


def apply_L(star, u, variant: str = "aligned") -> np.ndarray:
    u = as_field(u, 4)
    return l_star_op(StarTag(star), *u.shape[1:], variant)(u)


def apply_L_adjoint(star, w, variant: str = "aligned") -> np.ndarray:
    w = as_field(w, 4)
    return l_star_op(StarTag(star), *w.shape[1:], variant).adjoint(w)


def apply_L_condat(star, u) -> np.ndarray:
    u = as_field(u, 2)
    return l_condat_op(StarTag(star), *u.shape[1:])(u)


def apply_L_condat_adjoint(star, w) -> np.ndarray:
    w = as_field(w, 2)
    return l_condat_op(StarTag(star), *w.shape[1:]).adjoint(w)


@lru_cache(maxsize=None)
def stacked_l_op(model: str, n1: int, n2: int, variant: str = "aligned") -> GridOperator:
    """All interpolation operators of a model stacked vertically.

    Output shape is ``(n_stars * channels, n1, n2)``; for ``"new"`` the rows
    are the four 4-channel blocks in the order updown, leftright, center, plus.
    """
    if model == "new":
        ops = [l_star_op(s, n1, n2, variant) for s in STARS]
        ch = 4
    elif model == "condat":
        ops = [l_condat_op(s, n1, n2) for s in CONDAT_STARS]
        ch = 2
    else:
        raise ValueError(f"no interpolation family for model {model!r}")
    m = sp.vstack([op.matrix for op in ops]).tocsr()
    return GridOperator(m, (ch, n1, n2), (len(ops) * ch, n1, n2), f"L[{model}]")


@lru_cache(maxsize=None)
def big_l_op(model: str, n1: int, n2: int, variant: str = "aligned") -> GridOperator:
    """Block operator ``(u, s) -> (L_star u ..., Dadj u - s)``.

    Acts on and returns flat vectors: the input is ``u.ravel()`` followed by
    ``s.ravel()``, the output the stacked star blocks followed by the image
    block. Use :func:`assemble_big_L` / :func:`big_L_adjoint` for the
    structured view.
    """
    lops = stacked_l_op(model, n1, n2, variant)
    d = diff4_op(n1, n2) if model == "new" else gradient_op(n1, n2)
    npx = n1 * n2
    m = sp.bmat([[lops.matrix, None], [d.matrix.T, -sp.identity(npx)]]).tocsr()
    n_in = m.shape[1]
    n_out = m.shape[0]
    return GridOperator(m, (n_in,), (n_out,), f"bigL[{model}]")


def _channels(model: str) -> int:
    return 4 if model == "new" else 2


def assemble_big_L(u, s, model: str = "new", variant: str = "aligned"):
    """Apply the block operator to ``(u, s)``.

    Returns a tuple of one field per star (four for ``"new"``, three for
    ``"condat"``) followed by the image ``Dadj u - s``.
    """
    ch = _channels(model)
    u = as_field(u, ch, name="u")
    s = as_image(s, name="s")
    if s.shape != u.shape[1:]:
        raise GridError(f"u grid {u.shape[1:]} and s {s.shape} differ")
    n1, n2 = s.shape
    out = big_l_op(model, n1, n2, variant)(np.concatenate([u.ravel(), s.ravel()]))
    return _split_out(out, model, n1, n2)


def _split_out(flat, model, n1, n2):
    ch = _channels(model)
    nstar = 4 if model == "new" else 3
    blk = ch * n1 * n2
    stars = tuple(flat[k * blk:(k + 1) * blk].reshape(ch, n1, n2) for k in range(nstar))
    return stars + (flat[nstar * blk:].reshape(n1, n2),)


def big_L_adjoint(v, alpha, model: str = "new", variant: str = "aligned"):
    """Transpose of :func:`assemble_big_L`.

    ``v`` is a sequence of star fields, ``alpha`` an image. Returns
    ``(sum_star L_star* v_star + D alpha, -alpha)``.
    """
    ch = _channels(model)
    alpha = as_image(alpha, name="alpha")
    n1, n2 = alpha.shape
    nstar = 4 if model == "new" else 3
    if len(v) != nstar:
        raise GridError(f"expected {nstar} star fields, got {len(v)}")
    parts = [as_field(vk, ch, (n1, n2), name="v").ravel() for vk in v]
    flat = big_l_op(model, n1, n2, variant).adjoint(np.concatenate(parts + [alpha.ravel()]))
    blk = ch * n1 * n2
    return flat[:blk].reshape(ch, n1, n2), flat[blk:].reshape(n1, n2)
