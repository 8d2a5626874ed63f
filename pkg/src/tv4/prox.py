"""Proximal maps, projections and the block-average downscale operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, as_image, pixel_norm

__all__ = [
    "prox_quadratic",
    "group_soft_threshold",
    "project_unit_ball",
    "project_nonneg_ball",
    "project_box",
    "DownscaleOp",
    "downscale_apply",
    "downscale_adjoint",
    "project_affine",
]


def prox_quadratic(y, x, tau: float) -> np.ndarray:
    """Prox of ``z -> 0.5 ||z - y||^2`` with step ``tau``, evaluated at ``x``.

    Returns ``argmin_z 0.5 ||z - x||^2 / tau + 0.5 ||z - y||^2``.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != y.shape:
        raise GridError(f"shape mismatch: {x.shape} vs {y.shape}")
    return (x + tau * y) / (1.0 + tau)


def group_soft_threshold(v, gamma: float) -> np.ndarray:
    """Per-pixel radial shrinkage, the prox of ``gamma * sum_p |v(p)|``.

    ``v`` is ``(channels, n1, n2)``; pixels with ``|v(p)| <= gamma`` are set to 0.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    v = np.asarray(v, dtype=np.float64)
    if gamma == 0:
        return v.copy()
    nrm = pixel_norm(v)
    big = nrm > gamma
    scale = np.zeros_like(nrm)
    scale[big] = 1.0 - gamma / nrm[big]
    return v * scale


_SPHERE_SLACK = 8 * np.finfo(np.float64).eps


def project_unit_ball(v, radius: float = 1.0) -> np.ndarray:
    """Scale each pixel's channel vector into the ball of the given radius.

    Vectors within a few ulps of the sphere are left alone, which makes the
    map exactly idempotent despite rounding in the division.
    """
    v = np.asarray(v, dtype=np.float64)
    if radius == 0:
        return np.zeros_like(v)
    ratio = pixel_norm(v) / radius
    return v / np.where(ratio > 1.0 + _SPHERE_SLACK, ratio, 1.0)


def project_nonneg_ball(v, radius: float = 1.0) -> np.ndarray:
    """Projection onto ``{u >= 0, |u| <= radius}`` per pixel: clamp, then scale."""
    return project_unit_ball(np.maximum(np.asarray(v, dtype=np.float64), 0.0), radius)


def project_box(v, radius: float = 1.0) -> np.ndarray:
    """Channel-wise clip to ``[-radius, radius]`` (dual ball of the l1 norm)."""
    return np.clip(v, -radius, radius)


@dataclass(frozen=True)
class DownscaleOp:
    """Block averaging by an integer factor ``m`` on ``shape`` inputs."""

    m: int
    shape: tuple[int, int]

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"scale factor must be an integer >= 2, got {self.m}")
        n1, n2 = self.shape
        if n1 % self.m or n2 % self.m:
            raise GridError(f"image {n1}x{n2} is not divisible by scale factor {self.m}")

    @classmethod
    def for_lowres(cls, m: int, low_shape) -> "DownscaleOp":
        return cls(m, (low_shape[0] * m, low_shape[1] * m))

    @property
    def out_shape(self) -> tuple[int, int]:
        return (self.shape[0] // self.m, self.shape[1] // self.m)

    def __call__(self, x) -> np.ndarray:
        return downscale_apply(self, x)

    def adjoint(self, y) -> np.ndarray:
        return downscale_adjoint(self, y)


def downscale_apply(A: DownscaleOp, x) -> np.ndarray:
    """Mean over each ``m x m`` block."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != A.shape:
        if x.ndim == 2 and (x.shape[0] % A.m or x.shape[1] % A.m):
            raise GridError(f"image {x.shape} is not divisible by scale factor {A.m}")
        raise GridError(f"expected input of shape {A.shape}, got {x.shape}")
    k1, k2 = A.out_shape
    return x.reshape(k1, A.m, k2, A.m).mean(axis=(1, 3))


def downscale_adjoint(A: DownscaleOp, y) -> np.ndarray:
    """Transpose of block averaging: spread ``y(k) / m^2`` over block ``k``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != A.out_shape:
        raise GridError(f"expected low-resolution shape {A.out_shape}, got {y.shape}")
    return np.kron(y, np.ones((A.m, A.m))) / A.m**2


def project_affine(A: DownscaleOp, y, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``{z : A z = y}``.

    Since ``A A* = I / m^2`` this is ``x - m^2 A*(A x - y)``: every pixel of a
    block is shifted by that block's mean residual.
    """
    x = as_image(x)
    resid = downscale_apply(A, x) - np.asarray(y, dtype=np.float64)
    return x - A.m**2 * downscale_adjoint(A, resid)
