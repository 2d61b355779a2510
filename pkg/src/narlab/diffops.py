"""Finite-difference evaluation of the Laplace-Beltrami operator L of S = NA and
of its companion L^beta, in the coordinates (X, Z, a).

    L u = a^2 u_aa + a (a + |X|^2 / 4) sum_r u_rr + a sum_i u_ii
          + a sum_{r,i} <J_r X, e_i> u_ri + (1 - Q) a u_a

L^beta has the same second-order part with drift (1 - 2 beta) a u_a.  On the
abelian boundary (real hyperbolic space) L = a^2 (Delta + d_a^2) + (1 - Q) a d_a.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .htype import HTypeGroup, NPoint, SPoint

EPS = 1e-12

# central stencils: offsets and weights for d/dx and d^2/dx^2
_D1 = {2: ((-1, 1), (-0.5, 0.5)),
       4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12))}
_D2 = {2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
       4: ((-2, -1, 0, 1, 2), (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12))}


class StepUnderflow(ArithmeticError):
    """The finite-difference step vanished in floating point at the evaluation point."""


@dataclass(frozen=True)
class FDScheme:
    step: float = 1e-2
    order: int = 4
    richardson: bool = True

    def __post_init__(self):
        if not 0 < self.step <= 0.25:
            raise ValueError("step must lie in (0, 0.25]")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")


class _Field:
    """u seen as a function of the flat coordinate vector (X, Z, a)."""

    def __init__(self, g: HTypeGroup, u: Callable[[SPoint], complex], x: SPoint, h: float):
        self.g, self.u = g, u
        self.c0 = np.concatenate([x.n.X, x.n.Z, [x.a]])
        a = x.a
        sx = a if g.k == 0 else np.sqrt(a)
        self.steps = np.concatenate([np.full(g.dim_v, sx * h), np.full(g.k, a * h), [a * h]])
        for c, s in zip(self.c0, self.steps):
            if s <= 0 or c + s == c or a - 2 * s <= 0:
                raise StepUnderflow(f"finite-difference step {s:.3e} unusable at {c:.3e}")
        self._memo: dict = {}

    def __call__(self, offsets: tuple) -> complex:
        key = tuple(offsets)
        if key not in self._memo:
            c = self.c0.copy()
            for i, m in key:
                c[i] += m * self.steps[i]
            g = self.g
            n = NPoint(c[:g.dim_v], c[g.dim_v:g.dim_v + g.k])
            self._memo[key] = complex(self.u(SPoint(n, float(c[-1]))))
        return self._memo[key]

    def d1(self, i: int, order: int) -> complex:
        offs, ws = _D1[order]
        return sum(w * self(((i, m),)) for m, w in zip(offs, ws)) / self.steps[i]

    def d2(self, i: int, order: int) -> complex:
        offs, ws = _D2[order]
        return sum(w * self(((i, m),) if m else ()) for m, w in zip(offs, ws)) / self.steps[i] ** 2

    def d11(self, i: int, j: int, order: int) -> complex:
        offs, ws = _D1[order]
        tot = 0j
        for mi, wi in zip(offs, ws):
            for mj, wj in zip(offs, ws):
                tot += wi * wj * self(((i, mi), (j, mj)))
        return tot / (self.steps[i] * self.steps[j])


def _operator(g: HTypeGroup, u, x: SPoint, h: float, order: int, drift: float) -> complex:
    f = _Field(g, u, x, h)
    p2, k = g.dim_v, g.k
    a = x.a
    ia = p2 + k
    val = a * a * f.d2(ia, order) + drift * a * f.d1(ia, order)
    if k == 0:
        return val + a * a * sum(f.d2(i, order) for i in range(p2))
    X = x.n.X
    val += a * sum(f.d2(i, order) for i in range(p2))
    val += a * (a + 0.25 * float(X @ X)) * sum(f.d2(p2 + r, order) for r in range(k))
    coef = np.einsum("rij,j->ri", g.jmaps, X)  # <J_r X, e_i>
    for r in range(k):
        for i in range(p2):
            if coef[r, i] != 0.0:
                val += a * coef[r, i] * f.d11(p2 + r, i, order)
    return val


def _apply(g, u, x, scheme, drift) -> complex:
    scheme = scheme or FDScheme()
    coarse = _operator(g, u, x, scheme.step, scheme.order, drift)
    if not scheme.richardson:
        return coarse
    fine = _operator(g, u, x, scheme.step / 2, scheme.order, drift)
    w = 2.0**scheme.order
    return (w * fine - coarse) / (w - 1)


def apply_L(g: HTypeGroup, u, x: SPoint, scheme: FDScheme | None = None) -> complex:
    """Laplace-Beltrami operator of S applied to u at x."""
    return _apply(g, u, x, scheme, 1.0 - g.Q)


def apply_L_beta(g: HTypeGroup, beta: float, u, x: SPoint, scheme: FDScheme | None = None) -> complex:
    """L^beta u at x: the second-order part of L with drift (1 - 2 beta) a d_a."""
    return _apply(g, u, x, scheme, 1.0 - 2.0 * beta)


def a_derivative(g: HTypeGroup, u, x: SPoint, scheme: FDScheme | None = None) -> complex:
    """a d_a u at x (the first-order operator separating L and L^beta)."""
    scheme = scheme or FDScheme()

    def one(h):
        return x.a * _Field(g, u, x, h).d1(g.dim_v + g.k, scheme.order)

    if not scheme.richardson:
        return one(scheme.step)
    w = 2.0**scheme.order
    return (w * one(scheme.step / 2) - one(scheme.step)) / (w - 1)


def eigen_residual(g: HTypeGroup, beta: float, u, points, scheme: FDScheme | None = None,
                   via: str = "L") -> float:
    """max over points of |L u - (beta^2 - rho^2) u| / (|u| + eps).

    With ``via="L_beta"`` the equivalent quantity |L^beta v| / (|v| + eps) for
    v = a^{beta - rho} u is measured instead.
    """
    lam = beta * beta - g.rho * g.rho
    worst = 0.0
    for x in points:
        if via == "L":
            uv = complex(u(x))
            res = abs(apply_L(g, u, x, scheme) - lam * uv) / (abs(uv) + EPS)
        elif via == "L_beta":
            def v(y, _u=u):
                return y.a ** (beta - g.rho) * _u(y)
            vv = complex(v(x))
            res = abs(apply_L_beta(g, beta, v, x, scheme)) / (abs(vv) + EPS)
        else:
            raise ValueError("via must be 'L' or 'L_beta'")
        worst = max(worst, float(res))
    return worst


def harmonic_residual(g: HTypeGroup, beta: float, v, points, scheme: FDScheme | None = None) -> float:
    """max over points of |L^beta v| / (|v| + eps)."""
    worst = 0.0
    for x in points:
        worst = max(worst, abs(apply_L_beta(g, beta, v, x, scheme)) / (abs(complex(v(x))) + EPS))
    return float(worst)
