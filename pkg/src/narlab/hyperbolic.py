"""Real hyperbolic space H^l in the upper half-space model R^{l-1} x (0, inf).

The boundary is the abelian group R^{l-1}, so every transform reduces to the
abelian kernels q_y(x) = c_beta y^{2 beta} (y^2 + |x|^2)^{-(rho + beta)} with
rho = (l - 1) / 2.  The central object is the ray-limit function
G(alpha) = lim_{y -> 0} Q[mu](x0 + alpha y, y) on the plane (l = 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diffops import FDScheme, apply_L, apply_L_beta
from .geometry import Schedule, admissible_scan
from .htype import HTypeGroup, NPoint, SPoint, make_group
from .measures import estimate_limit
from .rng import pmap


@dataclass(frozen=True)
class HypSpace:
    l: int
    group: HTypeGroup = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 2:
            raise ValueError("hyperbolic space needs integer l >= 2")
        object.__setattr__(self, "group", make_group(f"abelian:{self.l - 1}"))

    @property
    def Q(self) -> int:
        return self.l - 1

    @property
    def rho(self) -> float:
        return (self.l - 1) / 2


def parse_space(spec: str) -> HypSpace:
    kind, _, arg = spec.partition(":")
    if kind != "hyperbolic":
        raise ValueError(f"unknown space {spec!r}; expected 'hyperbolic:l'")
    try:
        return HypSpace(int(arg))
    except ValueError as exc:
        raise ValueError(f"bad space {spec!r}: {exc}") from None


def _point(h: HypSpace, x, y: float) -> SPoint:
    return SPoint(NPoint(np.atleast_1d(np.asarray(x, float)), np.zeros(0)), float(y))


def _wrap(u):
    return lambda s: u(s.n.X if s.n.X.size > 1 else float(s.n.X[0]), s.a)


def hyp_apply_L_beta(h: HypSpace, beta: float, u, point, scheme: FDScheme | None = None) -> float:
    """y^2 (Delta + d_y^2) u - (2 beta - 1) y d_y u at point = (x, y); u is called as u(x, y)."""
    x, y = point
    return apply_L_beta(h.group, beta, _wrap(u), _point(h, x, y), scheme)


def hyp_apply_L(h: HypSpace, u, point, scheme: FDScheme | None = None) -> float:
    """Laplace-Beltrami operator y^2 (Delta + d_y^2) - (l - 2) y d_y."""
    x, y = point
    return apply_L(h.group, _wrap(u), _point(h, x, y), scheme)


def _require_plane(h: HypSpace):
    if h.l != 2:
        raise ValueError("slope-parameterized rays are defined on the plane (l = 2)")


def ray_limit_function(h: HypSpace, param, mu, x0: float, alpha_grid, schedule: Schedule | None = None,
                       quad=None) -> list:
    """[(alpha, LimitEstimate of Q[mu](x0 + alpha y, y) as y -> 0)] over the grid."""
    from .transform import q_transform

    _require_plane(h)
    schedule = schedule or Schedule()
    ys = schedule.grid()

    def one(alpha):
        vals = [q_transform(h.group, param, mu, _point(h, x0 + alpha * y, y), quad, strict=True)
                for y in ys]
        return float(alpha), estimate_limit(ys, vals, schedule.tol)

    return pmap(one, [float(a) for a in alpha_grid])


def two_ray_report(h: HypSpace, param, mu, x0: float, alpha1: float, alpha2: float, alpha_grid,
                   schedule: Schedule | None = None, quad=None) -> dict:
    """Ray limits L1, L2 along slopes alpha1, alpha2, the measured G on the grid and its
    deviation from the affine interpolants in the slope alpha and in the angle arctan(alpha).

    When L1 = L2 (within the schedule tolerance) an admissible scan at x0 is added.
    """
    from .transform import q_transform

    _require_plane(h)
    if alpha1 == alpha2:
        raise ValueError("the two slopes must differ")
    schedule = schedule or Schedule()
    grid = [float(a) for a in alpha_grid]
    res = dict(ray_limit_function(h, param, mu, x0, sorted(set(grid) | {alpha1, alpha2}),
                                  schedule, quad))
    L1, L2 = res[float(alpha1)].value, res[float(alpha2)].value
    t1, t2 = math.atan(alpha1), math.atan(alpha2)
    rows, dev, dev_ang = [], 0.0, 0.0
    for a in grid:
        G = res[a].value
        aff = L1 + (L2 - L1) * (a - alpha1) / (alpha2 - alpha1)
        aff_ang = L1 + (L2 - L1) * (math.atan(a) - t1) / (t2 - t1)
        dev = max(dev, abs(G - aff))
        dev_ang = max(dev_ang, abs(G - aff_ang))
        rows.append({"alpha": a, "G": [G.real, G.imag], "affine": [aff.real, aff.imag],
                     "angle_affine": [aff_ang.real, aff_ang.imag],
                     "converged": bool(res[a].converged)})
    report = {
        "L1": [L1.real, L1.imag],
        "L2": [L2.real, L2.imag],
        "max_affine_deviation": dev,
        "max_angle_affine_deviation": dev_ang,
        "grid": rows,
    }
    if abs(L1 - L2) <= schedule.tol * max(1.0, abs(L1)):
        n0 = NPoint(np.array([float(x0)]), np.zeros(0))
        scan = admissible_scan(h.group, lambda s: q_transform(h.group, param, mu, s, quad),
                               n0, schedule=schedule)
        report["admissible"] = {"value": [scan.value.real, scan.value.imag],
                                "converged": bool(scan.converged)}
    return report
