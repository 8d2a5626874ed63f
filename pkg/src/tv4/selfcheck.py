"""Numerical self-test of every linear operator and prox identity.

Adjoint pairs are checked with random vectors through
``|<K a, b> - <a, K* b>| <= tol * (1 + |<K a, b>|)``. The Moreau identity
ties the group soft threshold to the ball projection. The literal
published adjoint formulas are compared against the transposes and every
disagreement is listed (that part is informational and never fails).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffops import (
    apply_D2,
    apply_D2_adjoint,
    apply_D4,
    apply_D4_adjoint,
    d2_mask,
    d4_mask,
    upwind_adjoint,
    upwind_differences,
)
from .interp import (
    CONDAT_STARS,
    STARS,
    VARIANTS,
    apply_L,
    apply_L_adjoint,
    apply_L_condat,
    apply_L_condat_adjoint,
    assemble_big_L,
    big_L_adjoint,
)
from .prox import DownscaleOp, group_soft_threshold, project_affine, project_unit_ball
from .transcribed import Discrepancy, discrepancy_report

__all__ = ["Check", "SelfCheckReport", "adjoint_residual", "adjoint_checks", "moreau_checks", "run_selfcheck"]

DEFAULT_SIZES = ((2, 2), (3, 5), (8, 8), (17, 12), (64, 64))


@dataclass
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)

    def __str__(self) -> str:
        flag = "ok  " if self.passed else "FAIL"
        return f"{flag} {self.name:<34} max residual {self.residual:.2e} (tol {self.tol:.0e})"


@dataclass
class SelfCheckReport:
    checks: list[Check] = field(default_factory=list)
    discrepancies: list[Discrepancy] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = ["adjoint and prox identities:"]
        lines += ["  " + str(c) for c in self.checks]
        lines.append("")
        lines.append("published closed-form adjoints vs transposes (informational):")
        if self.discrepancies:
            lines += ["  " + str(d) for d in self.discrepancies]
        else:
            lines.append("  no differences")
        lines.append("")
        lines.append("PASS" if self.ok else "FAIL")
        return "\n".join(lines)


def adjoint_residual(forward: Callable, adjoint: Callable, a: np.ndarray, b: np.ndarray) -> float:
    """Relative mismatch ``|<K a, b> - <a, K* b>| / (1 + |<K a, b>|)``."""
    lhs = float(np.vdot(forward(a), b))
    rhs = float(np.vdot(a, adjoint(b)))
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def _worst(forward, adjoint, make_a, make_b, sizes, rng, trials):
    worst = 0.0
    for n1, n2 in sizes:
        for _ in range(trials):
            worst = max(worst, adjoint_residual(forward, adjoint, make_a(rng, n1, n2), make_b(rng, n1, n2)))
    return worst


def _img(rng, n1, n2):
    return rng.standard_normal((n1, n2))


def _f(ch, masked=None):
    def make(rng, n1, n2):
        u = rng.standard_normal((ch, n1, n2))
        return u * masked(n1, n2) if masked is not None else u
    return make


def adjoint_checks(sizes=DEFAULT_SIZES, seed: int = 0, trials: int = 3, tol: float = 1e-10) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []

    def add(name, fwd, adj, make_a, make_b, sz=sizes):
        checks.append(Check(name, _worst(fwd, adj, make_a, make_b, sz, rng, trials), tol))

    add("D2 / D2*", apply_D2, apply_D2_adjoint, _img, _f(2))
    add("D4 / D4*", apply_D4, apply_D4_adjoint, _img, _f(4))
    add("upwind differences", upwind_differences, upwind_adjoint, _img, _f(4))
    for variant in VARIANTS:
        for star in STARS:
            add(f"L_{star.value} [{variant}]",
                lambda u, s=star, v=variant: apply_L(s, u, v),
                lambda w, s=star, v=variant: apply_L_adjoint(s, w, v),
                _f(4, d4_mask), _f(4))
    for star in CONDAT_STARS:
        add(f"Lc_{star.value}",
            lambda u, s=star: apply_L_condat(s, u),
            lambda w, s=star: apply_L_condat_adjoint(s, w),
            _f(2, d2_mask), _f(2))

    for model, nstar, ch in (("new", 4, 4), ("condat", 3, 2)):
        for variant in (VARIANTS if model == "new" else ("aligned",)):
            def fwd(z, model=model, variant=variant, ch=ch):
                u, s = z
                return assemble_big_L(u, s, model, variant)

            def adj(w, model=model, variant=variant):
                return big_L_adjoint(w[:-1], w[-1], model, variant)

            def make_in(rng, n1, n2, ch=ch):
                return (rng.standard_normal((ch, n1, n2)), rng.standard_normal((n1, n2)))

            def make_out(rng, n1, n2, ch=ch, nstar=nstar):
                return tuple(rng.standard_normal((ch, n1, n2)) for _ in range(nstar)) + (
                    rng.standard_normal((n1, n2)),)

            name = f"bigL[{model}]" + (f" [{variant}]" if model == "new" else "")
            worst = 0.0
            for n1, n2 in sizes:
                for _ in range(trials):
                    a, b = make_in(rng, n1, n2), make_out(rng, n1, n2)
                    lhs = sum(float(np.vdot(p, q)) for p, q in zip(fwd(a), b))
                    rhs = sum(float(np.vdot(p, q)) for p, q in zip(a, adj(b)))
                    worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
            checks.append(Check(name, worst, tol))

    for m in (2, 4):
        even = [(n1 - n1 % m, n2 - n2 % m) for n1, n2 in sizes if n1 >= m and n2 >= m]
        A_cache = {}

        def getA(n1, n2, m=m):
            return A_cache.setdefault((n1, n2), DownscaleOp(m, (n1, n2)))

        worst = 0.0
        for n1, n2 in even:
            A = getA(n1, n2)
            for _ in range(trials):
                worst = max(worst, adjoint_residual(A, A.adjoint, _img(rng, n1, n2),
                                                    _img(rng, *A.out_shape)))
        checks.append(Check(f"downscale A (m={m})", worst, tol))
    return checks


def moreau_checks(seed: int = 0, tol: float = 1e-12) -> list[Check]:
    """``v = prox_{g |.|}(v) + g * P_ball(v / g)`` and ``A P(x) = y``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for gamma in (0.05, 0.7, 3.0):
        v = rng.standard_normal((4, 16, 16))
        r = v - group_soft_threshold(v, gamma) - gamma * project_unit_ball(v / gamma)
        worst = max(worst, float(np.abs(r).max()))
    checks = [Check("Moreau (group norm / unit ball)", worst, tol)]
    A = DownscaleOp(4, (16, 24))
    y = rng.random(A.out_shape)
    x = project_affine(A, y, rng.standard_normal((16, 24)))
    checks.append(Check("affine projection feasibility", float(np.abs(A(x) - y).max()), tol))
    return checks


def run_selfcheck(sizes=DEFAULT_SIZES, seed: int = 0, extra: list[Check] | None = None) -> SelfCheckReport:
    """Run all identities; ``extra`` appends caller-supplied checks."""
    checks = adjoint_checks(sizes, seed) + moreau_checks(seed)
    if extra:
        checks += list(extra)
    return SelfCheckReport(checks, discrepancy_report(seed=seed))
