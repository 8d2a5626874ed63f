"""Grid conventions shared by every operator in the package.

Images are 2-D float64 arrays of shape ``(n1, n2)`` indexed ``(row, col)``.
Multi-channel fields (gradients, dual variables) are 3-D arrays of shape
``(channels, n1, n2)``: a :data:`Field4` has four channels, a :data:`Field2`
two. Plain numpy arrays are used throughout; the helpers below only validate
and coerce.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "GridError",
    "as_image",
    "as_field",
    "inner_product",
    "pixel_norm",
    "group_l21_norm",
]


class GridError(ValueError):
    """Raised for malformed images or fields (bad shape, NaN/Inf, mismatch)."""


def as_image(x, name: str = "image") -> np.ndarray:
    """Return ``x`` as a finite float64 image with at least 2x2 pixels."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise GridError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise GridError(f"{name} must be at least 2x2, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GridError(f"{name} contains NaN or Inf")
    return a


def as_field(u, channels: int, shape: tuple[int, int] | None = None, name: str = "field") -> np.ndarray:
    """Return ``u`` as a finite float64 field of shape ``(channels, n1, n2)``."""
    a = np.asarray(u, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != channels:
        raise GridError(f"{name} must have shape ({channels}, n1, n2), got {a.shape}")
    if shape is not None and a.shape[1:] != tuple(shape):
        raise GridError(f"{name} grid {a.shape[1:]} does not match {tuple(shape)}")
    if not np.all(np.isfinite(a)):
        raise GridError(f"{name} contains NaN or Inf")
    return a


def inner_product(a, b) -> float:
    """Sum over all pixels and channels of ``a * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise GridError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a.ravel(), b.ravel()))


def pixel_norm(v) -> np.ndarray:
    """Euclidean norm of the channel vector at every pixel, shape ``(n1, n2)``."""
    v = np.asarray(v, dtype=np.float64)
    return np.sqrt(np.sum(v * v, axis=0))


def group_l21_norm(v) -> float:
    """Sum over pixels of the per-pixel Euclidean channel norm."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 3:
        raise GridError(f"expected a (channels, n1, n2) field, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GridError("field contains NaN or Inf")
    return float(pixel_norm(v).sum())
