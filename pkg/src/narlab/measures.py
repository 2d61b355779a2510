"""Complex boundary measures on N: finite sums of atoms and densities.

Provides ball masses, strong derivatives along shrinking ball families, the
sampled Hardy-Littlewood maximal function and the (H1) check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .htype import HTypeGroup, NPoint, sample_unit_sphere, unit_ball_volume
from .quadrature import QuadratureError, QuadratureSpec, integrate_ball
from .rng import make_rng

DensityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

REGISTERED_DENSITIES = ("haar", "indicator_ball:r", "heaviside_x1", "gaussian:s")


@dataclass(frozen=True)
class Atom:
    loc: NPoint
    weight: complex


@dataclass(frozen=True)
class Density:
    """weight * f against Haar measure.

    ``jumps`` lists hyperplanes X_1 = c across which f is discontinuous.
    """

    name: str
    f: DensityFn
    weight: complex = 1.0
    support_radius: float = math.inf
    jumps: tuple = ()
    smooth: bool = True

    def values(self, X, Z):
        return self.weight * np.asarray(self.f(X, Z), dtype=complex)


@dataclass(frozen=True)
class BoundaryMeasure:
    atoms: tuple = ()
    densities: tuple = ()
    description: str = ""

    def __add__(self, other: "BoundaryMeasure") -> "BoundaryMeasure":
        desc = " + ".join(d for d in (self.description, other.description) if d)
        return BoundaryMeasure(self.atoms + other.atoms, self.densities + other.densities, desc)

    def scaled(self, c: complex) -> "BoundaryMeasure":
        atoms = tuple(Atom(a.loc, c * a.weight) for a in self.atoms)
        dens = tuple(
            Density(d.name, d.f, c * d.weight, d.support_radius, d.jumps, d.smooth)
            for d in self.densities
        )
        return BoundaryMeasure(atoms, dens, f"{c}*({self.description})")

    @property
    def is_zero(self) -> bool:
        return not self.atoms and not self.densities

    def density_values(self, X, Z) -> np.ndarray:
        out = np.zeros(X.shape[:-1], dtype=complex)
        for d in self.densities:
            out = out + d.values(X, Z)
        return out

    @property
    def jumps(self) -> tuple:
        return tuple(sorted({c for d in self.densities for c in d.jumps}))

    @property
    def support_radius(self) -> float:
        return max((d.support_radius for d in self.densities), default=0.0)

    def is_positive(self) -> bool:
        """True when every weight is a non-negative real and every density is non-negative
        by construction (registered densities are)."""
        ws = [a.weight for a in self.atoms] + [d.weight for d in self.densities]
        return all(complex(w).imag == 0 and complex(w).real >= 0 for w in ws)

    def total_variation(self) -> "BoundaryMeasure":
        """|mu|: atoms at equal locations are merged first, densities combined pointwise."""
        merged: dict = {}
        order = []
        for a in self.atoms:
            key = hash(a.loc)
            if key not in merged:
                merged[key] = [a.loc, 0j]
                order.append(key)
            merged[key][1] += a.weight
        atoms = tuple(Atom(merged[k][0], abs(merged[k][1])) for k in order if merged[k][1] != 0)
        if self.is_positive():
            return BoundaryMeasure(atoms, self.densities, f"|{self.description}|")
        dens = self.densities
        if dens:
            combined = Density(
                "|" + "+".join(d.name for d in dens) + "|",
                lambda X, Z: np.abs(self.density_values(X, Z)),
                1.0,
                self.support_radius,
                self.jumps,
                all(d.smooth for d in dens),
            )
            dens = (combined,)
        return BoundaryMeasure(atoms, dens, f"|{self.description}|")

    def translate(self, g: HTypeGroup, n1: NPoint) -> "BoundaryMeasure":
        """Left translate: (n1 . mu)(E) = mu(n1^{-1} E)."""
        atoms = tuple(Atom(NPoint(*g.mul(n1.X, n1.Z, a.loc.X, a.loc.Z)), a.weight)
                      for a in self.atoms)
        shift = float(n1.X[0]) if n1.X.size else 0.0
        dens = []
        for d in self.densities:
            def f(X, Z, _f=d.f):
                Xi, Zi = g.mul(np.broadcast_to(-n1.X, X.shape), np.broadcast_to(-n1.Z, Z.shape), X, Z)
                return _f(Xi, Zi)
            radius = d.support_radius
            if math.isfinite(radius):
                radius = 2.0 * estimate_tau_bound(g) * (radius + g.norm(n1.X, n1.Z))
            dens.append(Density(d.name, f, d.weight, radius,
                                tuple(c + shift for c in d.jumps), d.smooth))
        return BoundaryMeasure(atoms, tuple(dens), f"translate({self.description})")


def estimate_tau_bound(g: HTypeGroup) -> float:
    # Koranyi gauge squared: tau <= 2; Euclidean: 1
    return 1.0 if g.k == 0 else 2.0


def make_density(g: HTypeGroup, name: str, weight: complex = 1.0) -> Density:
    """Registered densities: haar, indicator_ball:r, heaviside_x1, gaussian:s."""
    kind, _, arg = name.partition(":")
    if kind == "haar" and not arg:
        return Density(name, lambda X, Z: np.ones(X.shape[:-1]), weight)
    if kind == "heaviside_x1" and not arg:
        return Density(name, lambda X, Z: (X[..., 0] >= 0).astype(float), weight,
                       jumps=(0.0,), smooth=False)
    if kind in ("indicator_ball", "gaussian"):
        try:
            val = float(arg)
        except ValueError:
            raise ValueError(f"density {name!r} needs a numeric parameter") from None
        if not val > 0:
            raise ValueError(f"density {name!r}: parameter must be positive")
        if kind == "indicator_ball":
            return Density(name, lambda X, Z: (g.norm(X, Z) < val).astype(float), weight,
                           support_radius=val, smooth=False)
        s2 = 2.0 * val * val
        return Density(
            name,
            lambda X, Z: np.exp(-(np.sum(X * X, -1) + np.sum(Z * Z, -1)) / s2),
            weight,
        )
    raise ValueError(
        f"unknown density {name!r}; registered names: {', '.join(REGISTERED_DENSITIES)}"
    )


def haar(g: HTypeGroup, weight: complex = 1.0) -> BoundaryMeasure:
    return BoundaryMeasure((), (make_density(g, "haar", weight),), "haar")


def density_measure(g: HTypeGroup, name: str, weight: complex = 1.0) -> BoundaryMeasure:
    return BoundaryMeasure((), (make_density(g, name, weight),), name)


def atom(loc: NPoint, weight: complex = 1.0) -> BoundaryMeasure:
    return BoundaryMeasure((Atom(loc, weight),), (), "atom")


def signed_example(g: HTypeGroup) -> BoundaryMeasure:
    """-Haar + 2 * indicator of the unit ball: a signed measure satisfying (H1) at
    the identity whose (H3) defect stays bounded although it is not positive."""
    mu = haar(g, -1.0) + density_measure(g, "indicator_ball:1", 2.0)
    return BoundaryMeasure(mu.atoms, mu.densities, "signed_example")


# -- limits -------------------------------------------------------------------


@dataclass
class LimitEstimate:
    """Output of a limit-detection schedule.

    ``last_delta`` is the largest of the last two successive differences,
    divided by max(1, |last value|).
    """

    value: complex
    converged: bool
    last_delta: float
    samples: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def estimate_limit(params, values, tol: float) -> LimitEstimate:
    """Cauchy test on the last three samples, Aitken-extrapolated value."""
    vals = [complex(v) for v in values]
    samples = list(zip([float(p) for p in params], vals))
    if len(vals) < 3 or not all(np.isfinite(v) for v in vals):
        last = vals[-1] if vals else complex("nan")
        return LimitEstimate(last, False, math.inf, samples)
    v0, v1, v2 = vals[-3:]
    scale = max(1.0, abs(v2))
    delta = max(abs(v2 - v1), abs(v1 - v0)) / scale
    value = v2
    denom = v2 - 2 * v1 + v0
    if abs(denom) > 1e-300:
        ext = v2 - (v2 - v1) ** 2 / denom
        if abs(ext - v2) <= abs(v2 - v1):
            value = ext
    return LimitEstimate(value, delta <= tol, delta, samples)


# -- ball masses --------------------------------------------------------------


def _ball_contains(g, center: NPoint, r: float, loc: NPoint) -> bool:
    X, Z = g.mul(-center.X, -center.Z, loc.X, loc.Z)
    return float(g.norm(X, Z)) < r


def ball_mass(g: HTypeGroup, mu: BoundaryMeasure, center: NPoint, r: float,
              quad: QuadratureSpec | None = None, absolute: bool = False) -> complex:
    """mu(B(center, r)), or |mu|(B(center, r)) when ``absolute``."""
    if not r > 0:
        raise ValueError("ball radius must be positive")
    quad = quad or QuadratureSpec()
    if absolute:
        mu = mu.total_variation()
    total = 0j
    for a in mu.atoms:
        if _ball_contains(g, center, r, a.loc):
            total += a.weight
    if mu.densities:
        # a density supported in B(0, s) misses B(c, r) when d(c) > tau (s + r)
        if math.isfinite(mu.support_radius):
            if float(g.norm(center.X, center.Z)) > 2.0 * estimate_tau_bound(g) * (mu.support_radius + r):
                return total
        # one integral per density keeps ball_mass exactly linear in mu
        for d in mu.densities:
            if math.isfinite(d.support_radius) and float(g.norm(center.X, center.Z)) > (
                    2.0 * estimate_tau_bound(g) * (d.support_radius + r)):
                continue
            est = integrate_ball(g, d.values, quad, center.X, center.Z, r, jumps=d.jumps)
            total += est.value
    return total


def ball_volume(g: HTypeGroup, r: float) -> float:
    return r**g.Q * unit_ball_volume(g)


def _default_ball_family(g: HTypeGroup):
    rng = make_rng(12345)
    Xs, Zs = sample_unit_sphere(g, 4, rng)
    centers = [g.identity()]
    for i, t in enumerate((0.3, 0.6, 0.9, 1.2)):
        X, Z = g.dil(np.array(t), Xs[i], Zs[i])
        centers.append(NPoint(X, Z))
    return [(c, rad) for c in centers for rad in (0.5, 1.0, 2.0)]


def strong_derivative(g: HTypeGroup, mu: BoundaryMeasure, n0: NPoint, ball_family=None,
                      r_schedule=None, tol: float = 1e-2,
                      quad: QuadratureSpec | None = None) -> LimitEstimate:
    """Estimate D mu(n0) = lim_{r -> 0} mu(n0 delta_r B) / m(n0 delta_r B) over a ball family.

    Converged only if every ball's ratio sequence converges and all limits agree
    within ``tol`` (relative to max(1, |value|)); disagreement is reported.
    """
    family = list(ball_family) if ball_family is not None else _default_ball_family(g)
    if not family:
        raise ValueError("ball family must be non-empty")
    sched = list(r_schedule) if r_schedule is not None else list(np.geomspace(1e-1, 1e-3, 7))
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError("r_schedule must be strictly decreasing")
    per_ball = []
    for c, t in family:
        vals = []
        for r in sched:
            cX, cZ = g.dil(np.array(r), c.X, c.Z)
            cX, cZ = g.mul(n0.X, n0.Z, cX, cZ)
            mass = ball_mass(g, mu, NPoint(cX, cZ), r * t, quad)
            vals.append(mass / ball_volume(g, r * t))
        per_ball.append(estimate_limit(sched, vals, tol))
    limits = np.array([e.value for e in per_ball])
    all_conv = all(e.converged for e in per_ball)
    value = complex(np.mean(limits))
    spread = float(np.max(np.abs(limits - value))) / max(1.0, abs(value))
    converged = all_conv and spread <= tol
    samples = [(float(r), complex(np.mean([e.samples[j][1] for e in per_ball])))
               for j, r in enumerate(sched)]
    diag = {
        "per_ball": [
            {"center": c.to_dict(), "radius": t, "value": e.value, "converged": e.converged}
            for (c, t), e in zip(family, per_ball)
        ],
        "spread": spread,
    }
    return LimitEstimate(value, converged, max(spread, max(e.last_delta for e in per_ball)),
                         samples, diag)


# -- maximal function and (H1) --------------------------------------------------


@dataclass
class MaximalValue:
    value: float
    infinite: bool
    radii: list
    ratios: list


def _trend_unbounded(scales, values, slope_limit: float = -0.25) -> bool:
    """True when values blow up as the scale shrinks (log-log slope below the limit
    over the four smallest scales, monotone growth)."""
    order = np.argsort(scales)
    s = np.asarray(scales, float)[order][:4]
    v = np.asarray(values, float)[order][:4]
    if np.any(v <= 0) or len(v) < 4:
        return False
    if not np.all(np.diff(v) < 0):
        return False
    slope = np.polyfit(np.log(s), np.log(v), 1)[0]
    return bool(slope < slope_limit)


def maximal_function(g: HTypeGroup, mu: BoundaryMeasure, n0: NPoint, radius_grid=None,
                     quad: QuadratureSpec | None = None) -> MaximalValue:
    """Sampled sup_r |mu|(B(n0, r)) / m(B(n0, r)), flagged infinite on small-r blow-up."""
    grid = list(radius_grid) if radius_grid is not None else list(np.geomspace(1e-3, 10.0, 17))
    if not grid:
        raise ValueError("radius grid must be non-empty")
    tv = mu.total_variation()
    ratios = [float(abs(ball_mass(g, tv, n0, r, quad))) / ball_volume(g, r) for r in grid]
    infinite = _trend_unbounded(grid, ratios)
    return MaximalValue(math.inf if infinite else max(ratios), infinite, grid, ratios)


def check_H1(g: HTypeGroup, mu: BoundaryMeasure, n0: NPoint, t0: float, radius_grid=None,
             quad: QuadratureSpec | None = None):
    """(bounded?, sampled sup) for sup_{0<r<t0} |mu|(B(n0,r)) / m(B(n0,r))."""
    grid = list(radius_grid) if radius_grid is not None else list(np.geomspace(1e-4 * t0, 0.99 * t0, 13))
    if any(not 0 < r < t0 for r in grid):
        raise ValueError("radius grid must lie in (0, t0)")
    mf = maximal_function(g, mu, n0, grid, quad)
    return (not mf.infinite, max(mf.ratios))


__all__ = [
    "Atom", "Density", "BoundaryMeasure", "LimitEstimate", "MaximalValue", "REGISTERED_DENSITIES",
    "make_density", "haar", "density_measure", "atom", "signed_example", "estimate_limit", "ball_mass", "ball_volume",
    "strong_derivative", "maximal_function", "check_H1", "QuadratureError",
]
