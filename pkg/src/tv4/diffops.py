"""Forward differences on the pixel grid under the Neumann convention.

Any difference that would reference a pixel outside the grid is exactly
zero. Channel layout of the four-direction operator::

    0: x(i+1, j)   - x(i, j)     vertical
    1: x(i, j+1)   - x(i, j)     horizontal
    2: x(i+1, j+1) - x(i, j)     diagonal  d = ( 1, 1)
    3: x(i-1, j+1) - x(i, j)     diagonal  e = (-1, 1)

Diagonals carry unit weight (no 1/sqrt(2) scaling).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grid import as_field, as_image
from .linop import GridOperator, assemble

__all__ = [
    "d2_mask",
    "d4_mask",
    "gradient_op",
    "diff4_op",
    "upwind_op",
    "apply_D2",
    "apply_D2_adjoint",
    "apply_D4",
    "apply_D4_adjoint",
    "upwind_differences",
    "upwind_adjoint",
    "apply_upwind",
]

# (di, dj) of the forward neighbour for each channel of the 4-direction operator
D4_OFFSETS = ((1, 0), (0, 1), (1, 1), (-1, 1))
# neighbours compared by the upwind TV: down, up, right, left
UPWIND_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _offset_mask(n1: int, n2: int, offsets) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    out = np.empty((len(offsets), n1, n2), dtype=bool)
    for k, (di, dj) in enumerate(offsets):
        out[k] = (ii + di >= 0) & (ii + di < n1) & (jj + dj >= 0) & (jj + dj < n2)
    return out


@lru_cache(maxsize=None)
def d4_mask(n1: int, n2: int) -> np.ndarray:
    """Boolean ``(4, n1, n2)`` mask, False where a difference channel is structurally 0."""
    m = _offset_mask(n1, n2, D4_OFFSETS)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def d2_mask(n1: int, n2: int) -> np.ndarray:
    """Boolean ``(2, n1, n2)`` mask for the two-channel gradient."""
    m = _offset_mask(n1, n2, D4_OFFSETS[:2])
    m.flags.writeable = False
    return m


def _difference_terms(offsets, sign: float = 1.0):
    terms = []
    for k, (di, dj) in enumerate(offsets):
        terms.append((k, 0, di, dj, sign))
        terms.append((k, 0, 0, 0, -sign))
    return terms


@lru_cache(maxsize=None)
def gradient_op(n1: int, n2: int) -> GridOperator:
    """Two-channel forward-difference gradient as a :class:`GridOperator`."""
    return assemble(
        _difference_terms(D4_OFFSETS[:2]), n1, n2, 1, 2,
        out_mask=d2_mask(n1, n2), image_in=True, name="D2",
    )


@lru_cache(maxsize=None)
def diff4_op(n1: int, n2: int) -> GridOperator:
    """Four-direction difference operator as a :class:`GridOperator`."""
    return assemble(
        _difference_terms(D4_OFFSETS), n1, n2, 1, 4,
        out_mask=d4_mask(n1, n2), image_in=True, name="D4",
    )


@lru_cache(maxsize=None)
def upwind_op(n1: int, n2: int) -> GridOperator:
    """Linear part of the upwind TV: ``x(p) - x(neighbour)`` for the four neighbours.

    The upwind functional clamps these to their positive part; the clamp is
    left to the caller so the operator stays linear.
    """
    return assemble(
        _difference_terms(UPWIND_OFFSETS, sign=-1.0), n1, n2, 1, 4,
        out_mask=_offset_mask(n1, n2, UPWIND_OFFSETS), image_in=True, name="W",
    )


def apply_D2(x) -> np.ndarray:
    x = as_image(x)
    return gradient_op(*x.shape)(x)


def apply_D2_adjoint(u) -> np.ndarray:
    u = as_field(u, 2)
    return gradient_op(*u.shape[1:]).adjoint(u)


def apply_D4(x) -> np.ndarray:
    """Four-direction differences of an image, shape ``(4, n1, n2)``."""
    x = as_image(x)
    return diff4_op(*x.shape)(x)


def apply_D4_adjoint(u) -> np.ndarray:
    """Exact transpose of :func:`apply_D4`.

    Entries of ``u`` at structurally-zero positions do not contribute.
    """
    u = as_field(u, 4)
    return diff4_op(*u.shape[1:]).adjoint(u)


def upwind_differences(x) -> np.ndarray:
    x = as_image(x)
    return upwind_op(*x.shape)(x)


def upwind_adjoint(u) -> np.ndarray:
    u = as_field(u, 4)
    return upwind_op(*u.shape[1:]).adjoint(u)


def apply_upwind(x) -> np.ndarray:
    """Clamped one-sided differences ``(x(p) - x(q))_+`` for q below, above, right, left."""
    return np.maximum(upwind_differences(x), 0.0)
