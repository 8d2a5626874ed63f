"""Stencil-defined linear operators on pixel grids.

Every operator in the package is written down once as a list of stencil
terms and assembled into a sparse matrix for a given grid. The adjoint is
the transpose of that matrix, so forward/adjoint pairs are exact by
construction instead of being derived by hand.

A term ``(k_out, k_in, di, dj, w)`` contributes::

    out[k_out, i, j] += w * inp[k_in, i + di, j + dj]

with references outside the grid contributing nothing. Optional boolean
masks zero selected output samples (differences that are undefined at the
border) and ignore selected input samples (dual values pinned to zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = ["Term", "GridOperator", "assemble", "power_norm"]

Term = tuple[int, int, int, int, float]


@dataclass(frozen=True, eq=False)
class GridOperator:
    """A linear map between stacked grid arrays, backed by a CSR matrix.

    ``in_shape``/``out_shape`` are the array shapes the operator consumes and
    produces, e.g. ``(n1, n2)`` for an image or ``(4, n1, n2)`` for a field.
    """

    matrix: sp.csr_matrix
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_matrix_t", self.matrix.T.tocsr())

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.in_shape:
            raise ValueError(f"{self.name or 'operator'} expects shape {self.in_shape}, got {x.shape}")
        return (self.matrix @ x.ravel()).reshape(self.out_shape)

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != self.out_shape:
            raise ValueError(f"{self.name or 'operator'} adjoint expects shape {self.out_shape}, got {y.shape}")
        return (self._matrix_t @ y.ravel()).reshape(self.in_shape)

    @property
    def T(self) -> "GridOperator":
        return GridOperator(self._matrix_t, self.out_shape, self.in_shape, self.name + "*")

    def norm(self, **kwargs) -> float:
        """Power-method estimate of the spectral norm (see :func:`power_norm`)."""
        return power_norm(self, self.adjoint, self.in_shape, **kwargs)


def _channel_index(channels: int, n1: int, n2: int) -> np.ndarray:
    return np.arange(channels * n1 * n2).reshape(channels, n1, n2)


def assemble(
    terms: Sequence[Term],
    n1: int,
    n2: int,
    in_channels: int,
    out_channels: int,
    in_mask: np.ndarray | None = None,
    out_mask: np.ndarray | None = None,
    image_in: bool = False,
    image_out: bool = False,
    name: str = "",
) -> GridOperator:
    """Assemble stencil ``terms`` on an ``n1 x n2`` grid into a :class:`GridOperator`.

    ``image_in``/``image_out`` drop the channel axis on that side (only valid
    with one channel), so images keep their natural ``(n1, n2)`` shape.
    """
    idx_in = _channel_index(in_channels, n1, n2)
    idx_out = _channel_index(out_channels, n1, n2)
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    for k_out, k_in, di, dj, w in terms:
        src_i, src_j = ii + di, jj + dj
        ok = (src_i >= 0) & (src_i < n1) & (src_j >= 0) & (src_j < n2)
        rows.append(idx_out[k_out][ok])
        cols.append(idx_in[k_in, src_i[ok], src_j[ok]])
        vals.append(np.full(int(ok.sum()), float(w)))
    shape = (out_channels * n1 * n2, in_channels * n1 * n2)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    ).tocsr()
    if out_mask is not None:
        m = sp.diags(np.asarray(out_mask, dtype=np.float64).ravel()) @ m
    if in_mask is not None:
        m = m @ sp.diags(np.asarray(in_mask, dtype=np.float64).ravel())
    m = m.tocsr()
    m.eliminate_zeros()
    m.sum_duplicates()
    in_shape = (n1, n2) if image_in else (in_channels, n1, n2)
    out_shape = (n1, n2) if image_out else (out_channels, n1, n2)
    return GridOperator(m, in_shape, out_shape, name)


def power_norm(
    forward: Callable[[np.ndarray], np.ndarray],
    adjoint: Callable[[np.ndarray], np.ndarray],
    shape: tuple[int, ...],
    iters: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
) -> float:
    """Estimate ``||K||`` by power iteration on ``K* K`` from a seeded start."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        z = adjoint(forward(x))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        new = np.sqrt(nz)
        x = z / nz
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(est)

