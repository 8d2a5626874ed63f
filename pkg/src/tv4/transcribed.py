"""Published closed-form adjoints, transcribed literally.

These are kept only as a cross-check: the operators the package actually
uses are transposes of the assembled stencils. Every bracket below copies
the published index pattern as is, including the entries that disagree
with the forward operators (a repeated channel-3 bracket in ``D*``, a
channel-1 sample inside ``u2*``, and a channel-3 ``alpha`` bracket inside
``u4*``). :func:`discrepancy_report` lists where they differ.

Indices out of the grid read as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffops import apply_D4_adjoint, d4_mask
from .grid import as_field, as_image
from .interp import STARS, big_L_adjoint

__all__ = ["shifted", "literal_D4_adjoint", "literal_big_L_adjoint", "Discrepancy", "discrepancy_report"]


def shifted(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    """``out[i, j] = a[i + di, j + dj]``, zero where that index is off the grid."""
    n1, n2 = a.shape
    out = np.zeros_like(a)
    r0, r1 = max(0, -di), min(n1, n1 - di)
    c0, c1 = max(0, -dj), min(n2, n2 - dj)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = a[r0 + di:r1 + di, c0 + dj:c1 + dj]
    return out


def literal_D4_adjoint(u) -> np.ndarray:
    """The published ``D* u`` (two identical channel-3 brackets, no channel 4)."""
    u = as_field(u, 4)
    u1, u2, u3, _ = u
    S = shifted
    return ((S(u1, -1, 0) - u1) + (S(u2, -1, -1) - u2)
            + (S(u3, -1, -1) - u3) + (S(u3, -1, -1) - u3))


def literal_big_L_adjoint(v, alpha):
    """The published ``L* (v_updown, v_leftright, v_center, v_plus, alpha)``.

    Returns ``(u_star, s_star)`` with ``u_star`` a 4-channel field.
    """
    alpha = as_image(alpha, "alpha")
    vu, vl, vc, vp = (as_field(f, 4, alpha.shape) for f in v)
    S, a = shifted, alpha
    u1 = (vu[0]
          + 0.25 * (vl[0] + S(vl[0], 1, 0) + S(vl[0], 0, -1) + S(vl[0], 1, -1))
          + 0.5 * (vc[0] + S(vc[0], 1, 0))
          + 0.5 * (vp[0] + S(vp[0], 0, -1))
          + (S(a, 1, 0) - a))
    u2 = (0.25 * (vu[1] + S(vu[1], 0, 1) + S(vu[1], -1, 0) + S(vu[1], -1, 1))
          + vl[1]
          + 0.5 * (vc[1] + S(vc[1], 0, 1))
          + 0.5 * (vp[1] + S(vp[0], -1, 0))
          + (S(a, 0, 1) - a))
    u3 = (0.5 * (vu[2] + S(vu[2], 1, 0))
          + 0.5 * (vl[2] + S(vl[2], 0, 1))
          + vp[2]
          + 0.25 * (vc[2] + S(vc[2], 0, 1) + S(vc[2], 1, 0) + S(vc[2], 1, 1))
          + (S(a, 1, 1) - a))
    u4 = (0.5 * (vu[3] + S(vu[3], 0, -1))
          + 0.5 * (S(vl[3], 0, -1) + S(vl[3], 1, -1))
          + S(vp[3], 0, -1)
          + 0.25 * (vc[3] + S(vc[3], 1, 0) + S(vc[3], 0, -1) + S(vc[3], 1, -1))
          + (S(a, 1, 1) - a))
    return np.stack([u1, u2, u3, u4]), -alpha


@dataclass
class Discrepancy:
    formula: str
    component: str
    against: str
    max_abs_diff: float

    def __str__(self) -> str:
        return f"{self.formula:<8} {self.component:<4} vs {self.against:<22} max |diff| = {self.max_abs_diff:.3e}"


def discrepancy_report(n1: int = 8, n2: int = 8, seed: int = 0, atol: float = 1e-12,
                       variants=("printed", "aligned")) -> list[Discrepancy]:
    """Compare the literal formulas with the mechanical transposes.

    Inputs are random; the 4-channel input of ``D*`` is restricted to the
    structurally admissible entries, and outputs are compared on that same
    set (the transposes are zero elsewhere by construction). Only
    components whose maximum difference exceeds ``atol`` are returned.
    """
    rng = np.random.default_rng(seed)
    mask = d4_mask(n1, n2)
    out = []

    u = rng.standard_normal((4, n1, n2)) * mask
    diff = np.abs(literal_D4_adjoint(u) - apply_D4_adjoint(u)).max()
    if diff > atol:
        out.append(Discrepancy("D*", "x", "transpose", float(diff)))

    v = [rng.standard_normal((4, n1, n2)) for _ in STARS]
    alpha = rng.standard_normal((n1, n2))
    lit_u, lit_s = literal_big_L_adjoint(v, alpha)
    lit_u = lit_u * mask
    for variant in variants:
        ref_u, ref_s = big_L_adjoint(v, alpha, "new", variant)
        for k in range(4):
            d = np.abs(lit_u[k] - ref_u[k]).max()
            if d > atol:
                out.append(Discrepancy("L*", f"u{k + 1}*", f"transpose[{variant}]", float(d)))
        d = np.abs(lit_s - ref_s).max()
        if d > atol:
            out.append(Discrepancy("L*", "s*", f"transpose[{variant}]", float(d)))
    return out
