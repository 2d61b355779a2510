"""The convolution transforms Q_{i beta}[mu], P_{i beta}[mu] and the quantitative
estimates built on them: Hardy-Littlewood bounds, finiteness, tail decay and (H3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .htype import HTypeGroup, NPoint, SPoint, estimate_tau, sample_unit_sphere, unit_ball_volume
from .kernels import SpectralParam, q_values
from .measures import BoundaryMeasure, ball_mass, ball_volume, maximal_function
from .quadrature import Estimate, QuadratureError, QuadratureSpec, integrate_n
from .rng import make_rng


def q_transform_estimate(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, x: SPoint,
                         quad: QuadratureSpec | None = None) -> Estimate:
    """Q_{i beta}[mu](n, a) with an error estimate.

    Atoms are summed exactly.  Densities are integrated after the substitution
    n1 = n delta_a(n'), which turns the integrand into q_1(n') f(n delta_a n').
    """
    quad = quad or QuadratureSpec()
    n, a = x.n, x.a
    total = 0j
    for at in mu.atoms:
        X, Z = g.mul(-at.loc.X, -at.loc.Z, n.X, n.Z)
        total += at.weight * float(q_values(g, param, a, X, Z))
    if not mu.densities:
        return Estimate(total, 0.0, len(mu.atoms))

    step = a if g.k == 0 else math.sqrt(a)
    x1 = float(n.X[0]) if n.X.size else 0.0
    err, evals = 0.0, len(mu.atoms)
    # one integral per density keeps the transform exactly linear in mu
    for dens in mu.densities:
        def integrand(Xp, Zp, f=dens.values):
            Xd, Zd = g.dil(np.full(Xp.shape[:-1], a), Xp, Zp)
            Xn, Zn = g.mul(np.broadcast_to(n.X, Xd.shape), np.broadcast_to(n.Z, Zd.shape), Xd, Zd)
            return q_values(g, param, 1.0, Xp, Zp) * f(Xn, Zn)

        jumps = [(c - x1) / step for c in dens.jumps]
        est = integrate_n(g, integrand, quad, scale=1.0, tail_exponent=2 * param.beta, jumps=jumps)
        total += est.value
        err += est.error
        evals += est.evals
    return Estimate(total, err, evals)


def q_transform(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, x: SPoint,
                quad: QuadratureSpec | None = None, strict: bool = False) -> complex:
    """Q_{i beta}[mu](x).  With ``strict`` a missed tolerance raises QuadratureError."""
    quad = quad or QuadratureSpec()
    est = q_transform_estimate(g, param, mu, x, quad)
    if strict and not est.ok(quad):
        raise QuadratureError(
            f"Q transform at a={x.a:.3e}: error {est.error:.3e} exceeds tolerance"
        )
    return complex(est.value)


def p_transform(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, x: SPoint,
                quad: QuadratureSpec | None = None, strict: bool = False) -> complex:
    """P_{i beta}[mu](n, a) = a^{rho - beta} Q_{i beta}[mu](n, a)."""
    return x.a ** (g.rho - param.beta) * q_transform(g, param, mu, x, quad, strict)


def _weight_base(g: HTypeGroup) -> float:
    return 1.0 if g.k == 0 else 16.0


def finiteness_check(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, tau: float,
                     quad: QuadratureSpec | None = None, shells: int = 14):
    """Decide whether int (16 + d(n)^2 / (4 tau^2))^{-beta-rho} d|mu|(n) is finite.

    The integral is accumulated over dyadic shells 2^j < d < 2^{j+1}; it is
    declared finite when the shell contributions decay geometrically (ratio
    below 0.95 on the last three shells), and the geometric tail is added.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    quad = quad or QuadratureSpec()
    tv = mu.total_variation()
    c16 = _weight_base(g)
    expo = param.beta + g.rho

    def weight(X, Z):
        d = g.norm(X, Z)
        return (c16 + d * d / (4 * tau * tau)) ** -expo

    total = sum(abs(at.weight) * float(weight(at.loc.X, at.loc.Z)) for at in tv.atoms)
    if not tv.densities:
        return True, total

    def F(X, Z):
        return weight(X, Z) * np.abs(tv.density_values(X, Z))

    edges = [0.0] + [2.0**j for j in range(shells + 1)]
    contrib = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo >= tv.support_radius:
            contrib.append(0.0)
            continue
        contrib.append(float(integrate_n(g, F, quad, r_min=lo, r_max=hi).value.real))
    total += sum(contrib)
    last = contrib[-4:]
    if last[-1] == 0.0:
        return True, total
    ratios = [b / a if a > 0 else math.inf for a, b in zip(last[:-1], last[1:])]
    if all(r < 0.95 for r in ratios):
        r = ratios[-1]
        return True, total + last[-1] * r / (1 - r)
    return False, math.inf


def tail_integral(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, delta: float,
                  x: SPoint, quad: QuadratureSpec | None = None, tau: float | None = None) -> float:
    """int_{B(0, delta)^c} q_a(n1^{-1} n) d|mu|(n1) at x = (n, a)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    tau = estimate_tau(g) if tau is None else tau
    if float(g.norm(x.n.X, x.n.Z)) >= delta**2 / (2 * tau):
        raise ValueError("tail_integral requires n in B(0, delta^2 / (2 tau))")
    quad = quad or QuadratureSpec()
    tv = mu.total_variation()
    n, a = x.n, x.a
    total = 0.0
    for at in tv.atoms:
        if float(g.norm(at.loc.X, at.loc.Z)) >= delta:
            X, Z = g.mul(-at.loc.X, -at.loc.Z, n.X, n.Z)
            total += abs(at.weight) * float(q_values(g, param, a, X, Z))
    if not tv.densities or tv.support_radius <= delta:
        return total

    def F(X, Z):
        Xi, Zi = g.mul(-X, -Z, np.broadcast_to(n.X, X.shape), np.broadcast_to(n.Z, Z.shape))
        return q_values(g, param, a, Xi, Zi) * np.abs(tv.density_values(X, Z))

    est = integrate_n(g, F, quad, r_min=delta, scale=delta, tail_exponent=2 * param.beta)
    return total + float(est.value.real)


def hl_lower_constant(g: HTypeGroup, param: SpectralParam, alpha: float, tau: float) -> float:
    """c_beta m(B(0,1)) / (16 + 8 C tau + C^2 tau^2)^{rho+beta} with C = 1 + sqrt(2) alpha.

    On the abelian boundary the kernel base is a^2 + |x|^2 and the constant
    becomes c_beta m(B(0,1)) / (1 + C^2 tau^2)^{rho+beta}.
    """
    if not alpha > 0 or tau < 1:
        raise ValueError("need alpha > 0 and tau >= 1")
    C = 1.0 + math.sqrt(2.0) * alpha
    V = unit_ball_volume(g)
    if g.k == 0:
        den = 1.0 + C * C * tau * tau
    else:
        den = 16.0 + 8.0 * C * tau + C * C * tau * tau
    return param.c_beta * V / den ** (g.rho + param.beta)


@dataclass
class HLReport:
    constant: float
    tau: float
    rows: list
    violations: int
    maximal: float
    maximal_infinite: bool
    ratio_b: float

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "tau": self.tau,
            "violations": self.violations,
            "maximal_function": self.maximal,
            "maximal_infinite": self.maximal_infinite,
            "sup_ratio_b": self.ratio_b,
            "rows": self.rows,
        }


def verify_hl(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, n0: NPoint, alpha: float,
              sample, quad: QuadratureSpec | None = None, tau: float | None = None,
              radius_grid=None) -> HLReport:
    """Check C |mu|(B(n0,a)) / m(B(n0,a)) <= Q[|mu|](ray point) on each sample
    (a, omega, zeta, theta), and report sup |Q[mu]| / M_HL(mu)(n0) over the sampled
    ray points (which lie in every cone of aperture above alpha)."""
    from .geometry import Ray, ray_point

    quad = quad or QuadratureSpec()
    tau = estimate_tau(g) if tau is None else tau
    C = hl_lower_constant(g, param, alpha, tau)
    tv = mu.total_variation()
    rows, violations, sup_q = [], 0, 0.0
    for a, omega, zeta, theta in sample:
        ray = Ray(n0, alpha, np.asarray(omega, float), np.asarray(zeta, float), float(theta))
        x = ray_point(g, ray, a)
        mass = abs(ball_mass(g, tv, n0, a, quad)) if not tv.is_zero else 0.0
        lhs = C * mass / ball_volume(g, a)
        rhs = q_transform(g, param, tv, x, quad).real if not tv.is_zero else 0.0
        holds = lhs <= rhs * (1 + 1e-8) + quad.abs_tol
        violations += not holds
        qmu = abs(q_transform(g, param, mu, x, quad)) if not mu.is_zero else 0.0
        sup_q = max(sup_q, qmu)
        rows.append({"a": a, "theta": theta, "lhs": lhs, "rhs": rhs, "holds": bool(holds),
                     "abs_q": qmu})
    mf = maximal_function(g, mu, n0, radius_grid, quad)
    if mf.infinite:
        ratio = 0.0
    elif mf.value > 0:
        ratio = sup_q / mf.value
    else:
        ratio = 0.0 if sup_q == 0 else math.inf
    return HLReport(C, tau, rows, violations, mf.value, mf.infinite, ratio)


def neighborhood_sample(g: HTypeGroup, n0: NPoint, count: int = 24, seed: int = 0,
                        a_range=(1e-3, 0.5), aperture: float = 1.0):
    """Points (n0 delta_{t a}(sigma), a) in the cone of the given aperture, with
    a log-spaced over ``a_range``."""
    rng = make_rng(seed, 11)
    Xs, Zs = sample_unit_sphere(g, count, rng)
    t = rng.uniform(0.0, aperture, size=count)
    a_vals = np.geomspace(a_range[1], a_range[0], count)
    pts = []
    for i in range(count):
        X, Z = g.dil(np.array(t[i] * a_vals[i]), Xs[i], Zs[i])
        X, Z = g.mul(n0.X, n0.Z, X, Z)
        pts.append(SPoint(NPoint(X, Z), float(a_vals[i])))
    return pts


def check_H3(g: HTypeGroup, param: SpectralParam, mu: BoundaryMeasure, n0: NPoint,
             neighborhood=None, quad: QuadratureSpec | None = None):
    """(bounded?, sampled sup) of Q[|mu|] - |Q[mu]| over a neighbourhood sample of (n0, 0)."""
    from .measures import _trend_unbounded

    pts = list(neighborhood) if neighborhood is not None else neighborhood_sample(g, n0)
    tv = mu.total_variation()
    defects, scales = [], []
    for x in pts:
        if mu.is_positive():
            dfc = 0.0
        else:
            dfc = q_transform(g, param, tv, x, quad).real - abs(q_transform(g, param, mu, x, quad))
        defects.append(max(dfc, 0.0))
        scales.append(x.a)
    sup = max(defects) if defects else 0.0
    bounded = math.isfinite(sup) and not _trend_unbounded(scales, defects)
    return bounded, sup
