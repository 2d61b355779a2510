"""Poisson kernel P_a and the generalized kernel q_a^{i beta}.

Normalizing constants are fixed numerically (unit L^1 mass); they are never
taken from a closed form.  For the abelian boundary (k = 0) the kernels are the
real hyperbolic ones, c a^{2 beta} (a^2 + |x|^2)^{-(rho + beta)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .htype import HTypeGroup, NPoint
from .quadrature import QuadratureError, QuadratureSpec, radial_mass


@dataclass(frozen=True)
class SpectralParam:
    beta: float
    c_beta: float
    c_pk: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not (self.c_beta > 0 and self.c_pk > 0):
            raise ValueError("normalizing constants must be positive")


def _base(g: HTypeGroup, a, X, Z):
    """16a^2 + 8a|X|^2 + d(X, Z)^2, or a^2 + |x|^2 when k = 0."""
    x2 = np.sum(X * X, axis=-1)
    if g.k == 0:
        return a * a + x2
    return 16.0 * a * a + 8.0 * a * x2 + x2 * x2 + 16.0 * np.sum(Z * Z, axis=-1)


def q_values(g: HTypeGroup, param: SpectralParam, a, X, Z) -> np.ndarray:
    """Vectorized q_a^{i beta}(X, Z), evaluated in the log domain."""
    a = np.asarray(a, dtype=float)
    beta = param.beta
    logv = (np.log(param.c_beta) + 2 * beta * np.log(a)
            - (g.rho + beta) * np.log(_base(g, a, X, Z)))
    return np.exp(logv)


def p_values(g: HTypeGroup, param: SpectralParam, a, X, Z) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if g.k == 0:
        logv = np.log(param.c_pk) + g.Q * np.log(a) - g.Q * np.log(_base(g, a, X, Z))
    else:
        logv = (np.log(param.c_pk) + g.Q * np.log(16.0 * a)
                - g.Q * np.log(_base(g, a, X, Z)))
    return np.exp(logv)


def poisson_p(g: HTypeGroup, param: SpectralParam, a: float, n: NPoint) -> float:
    """P_a(n) = 16^Q c_pk a^Q / (16a^2 + 8a|X|^2 + d(n)^2)^Q."""
    if not a > 0:
        raise ValueError("a must be positive")
    return float(p_values(g, param, a, n.X, n.Z))


def q_kernel(g: HTypeGroup, param: SpectralParam, a: float, n: NPoint) -> float:
    """q_a(n) = c_beta a^{2 beta} (16a^2 + 8a|X|^2 + d(n)^2)^{-(rho + beta)}."""
    if not a > 0:
        raise ValueError("a must be positive")
    return float(q_values(g, param, a, n.X, n.Z))


def _unnormalized_mass(g: HTypeGroup, exponent: float, rel_tol: float) -> float:
    # |profile| ~ d^{-2 exponent}: excess decay over d^{-Q} is 2 exponent - Q
    if g.k == 0:
        prof = lambda r, t: (1.0 + r * r) ** -exponent  # noqa: E731
    else:
        prof = lambda r, t: (16.0 + 8 * r * r + r**4 + 16 * t * t) ** -exponent  # noqa: E731
    return radial_mass(g, prof, 2 * exponent - g.Q, rel_tol=rel_tol)


def calibrate(g: HTypeGroup, beta: float, quad: QuadratureSpec | None = None) -> SpectralParam:
    """Fix c_beta and c_pk so that q_1^{i beta} and P_1 have unit mass."""
    if not beta > 0:
        raise ValueError("beta must be positive (the beta-kernel mass diverges otherwise)")
    rel_tol = 1e-12 if quad is None else min(quad.rel_tol, 1e-10)
    key = ("calibrate", float(beta), rel_tol)
    if key in g._cache:
        return g._cache[key]
    mass_q = _unnormalized_mass(g, g.rho + beta, rel_tol)
    mass_p = _unnormalized_mass(g, g.Q, rel_tol)
    if not (np.isfinite(mass_q) and mass_q > 0 and np.isfinite(mass_p) and mass_p > 0):
        raise QuadratureError("kernel mass did not converge")
    c_pk = 1.0 / mass_p
    if g.k:
        # P_1 = 16^Q c_pk (16 + 8|X|^2 + d^2)^{-Q}
        c_pk /= 16.0**g.Q
    param = SpectralParam(float(beta), 1.0 / mass_q, c_pk)
    g._cache[key] = param
    return param
