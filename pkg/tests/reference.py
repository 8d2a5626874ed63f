"""Slow scalar reference implementations used as test oracles.

Everything here is written with explicit loops straight from the
definitions, independently of the sparse-stencil machinery in the package.
Indices are 0-based; anything off the grid reads as zero.
"""

import math

import numpy as np

D4_STEPS = ((1, 0), (0, 1), (1, 1), (-1, 1))


def _inside(x, i, j):
    return 0 <= i < x.shape[0] and 0 <= j < x.shape[1]


def d4_loop(x):
    n1, n2 = x.shape
    out = np.zeros((4, n1, n2))
    for k, (di, dj) in enumerate(D4_STEPS):
        for i in range(n1):
            for j in range(n2):
                if _inside(x, i + di, j + dj):
                    out[k, i, j] = x[i + di, j + dj] - x[i, j]
    return out


def d2_loop(x):
    return d4_loop(x)[:2]


def valid_loop(n1, n2):
    """1 where difference k at (i, j) references an in-grid neighbour."""
    m = np.zeros((4, n1, n2))
    for k, (di, dj) in enumerate(D4_STEPS):
        for i in range(n1):
            for j in range(n2):
                m[k, i, j] = 0 <= i + di < n1 and 0 <= j + dj < n2
    return m


def upwind_loop(x):
    n1, n2 = x.shape
    out = np.zeros((4, n1, n2))
    for i in range(n1):
        for j in range(n2):
            for k, (di, dj) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
                if _inside(x, i + di, j + dj):
                    out[k, i, j] = max(x[i, j] - x[i + di, j + dj], 0.0)
    return out


def tv_iso_loop(x):
    d = d2_loop(x)
    return sum(math.hypot(d[0, i, j], d[1, i, j]) for i in range(x.shape[0]) for j in range(x.shape[1]))


def tv_aniso_loop(x):
    d = d2_loop(x)
    return sum(abs(d[0, i, j]) + abs(d[1, i, j]) for i in range(x.shape[0]) for j in range(x.shape[1]))


def tv_upwind_loop(x):
    d = upwind_loop(x)
    return sum(math.sqrt(sum(d[k, i, j] ** 2 for k in range(4)))
               for i in range(x.shape[0]) for j in range(x.shape[1]))


def tv_prn_loop(x):
    d = d4_loop(x)
    return sum(math.sqrt(sum(d[k, i, j] ** 2 for k in range(4)))
               for i in range(x.shape[0]) for j in range(x.shape[1]))


# -- interpolation -----------------------------------------------------------

def _reader(u):
    """``U(k, i, j)``: channel k at (i, j), zero off-grid or where the
    matching difference is structurally zero."""
    valid = valid_loop(*u.shape[1:])

    def U(k, i, j):
        if 0 <= i < u.shape[1] and 0 <= j < u.shape[2] and valid[k, i, j]:
            return u[k, i, j]
        return 0.0
    return U


def L_printed_loop(star, u, shift=True):
    """The published four-channel stencils, one line per formula."""
    U = _reader(u)
    n1, n2 = u.shape[1:]
    out = np.zeros_like(u, dtype=float)
    for i in range(n1):
        for j in range(n2):
            if star == "updown":
                r = (U(0, i, j),
                     (U(1, i, j) + U(1, i, j - 1) + U(1, i + 1, j) + U(1, i + 1, j - 1)) / 4,
                     (U(2, i, j) + U(2, i - 1, j)) / 2,
                     (U(3, i, j) + U(3, i, j + 1)) / 2)
            elif star == "leftright":
                r = ((U(0, i, j) + U(0, i - 1, j) + U(0, i, j + 1) + U(0, i - 1, j + 1)) / 4,
                     U(1, i, j),
                     (U(2, i, j) + U(2, i, j - 1)) / 2,
                     (U(3, i, j + 1) + U(3, i - 1, j + 1)) / 2)
            elif star == "center":
                r = ((U(0, i, j) + U(0, i - 1, j)) / 2,
                     (U(1, i, j) + U(1, i, j - 1)) / 2,
                     (U(2, i, j) + U(2, i, j - 1) + U(2, i - 1, j) + U(2, i - 1, j - 1)) / 4,
                     (U(3, i, j) + U(3, i - 1, j) + U(3, i, j + 1) + U(3, i - 1, j + 1)) / 4)
            elif star == "plus":
                r = ((U(0, i, j) + U(0, i, j + 1)) / 2,
                     (U(1, i, j) + U(1, i + 1, j)) / 2,
                     U(2, i, j),
                     U(3, i, j + 1) if shift else U(3, i, j))
            else:
                raise ValueError(star)
            out[:, i, j] = r
    return out


def L_condat_loop(star, u):
    U = _reader(np.concatenate([u, np.zeros((2,) + u.shape[1:])]))
    n1, n2 = u.shape[1:]
    out = np.zeros_like(u, dtype=float)
    for i in range(n1):
        for j in range(n2):
            if star == "updown":
                r = (U(0, i, j), (U(1, i, j) + U(1, i, j - 1) + U(1, i + 1, j) + U(1, i + 1, j - 1)) / 4)
            elif star == "leftright":
                r = ((U(0, i, j) + U(0, i - 1, j) + U(0, i, j + 1) + U(0, i - 1, j + 1)) / 4, U(1, i, j))
            elif star == "center":
                r = ((U(0, i, j) + U(0, i - 1, j)) / 2, (U(1, i, j) + U(1, i, j - 1)) / 2)
            else:
                raise ValueError(star)
            out[:, i, j] = r
    return out


# sample sites relative to pixel (i, j), in pixel units
CHANNEL_SITE = ((0.5, 0.0), (0.0, 0.5), (0.5, 0.5), (-0.5, 0.5))
STAR_SITE = {"updown": (0.5, 0.0), "leftright": (0.0, 0.5), "center": (0.0, 0.0), "plus": (0.5, 0.5)}


def L_geometric_loop(star, u):
    """Average, per channel, every sample lying within half a pixel (in both
    coordinates) of the target site; equal weights, missing samples as 0."""
    U = _reader(u)
    n1, n2 = u.shape[1:]
    ti, tj = STAR_SITE[star]
    out = np.zeros_like(u, dtype=float)
    for k, (ci, cj) in enumerate(CHANNEL_SITE):
        # offsets q - p with |q + c - (p + t)| <= 1/2 componentwise
        offs = [(a, b) for a in range(-2, 3) for b in range(-2, 3)
                if abs(a + ci - ti) <= 0.5 and abs(b + cj - tj) <= 0.5]
        for i in range(n1):
            for j in range(n2):
                out[k, i, j] = sum(U(k, i + a, j + b) for a, b in offs) / len(offs)
    return out


def downscale_loop(x, m):
    n1, n2 = x.shape
    out = np.zeros((n1 // m, n2 // m))
    for a in range(n1 // m):
        for b in range(n2 // m):
            s = 0.0
            for i in range(m):
                for j in range(m):
                    s += x[a * m + i, b * m + j]
            out[a, b] = s / (m * m)
    return out
