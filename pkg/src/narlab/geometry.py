"""Approach geometries in S = NA (rays, sectors, admissible cones), limit
detection along them, and the Fatou experiment driver.

A ray from n0 with aperture alpha is
    gamma(a) = (n0 . (sqrt(alpha a |cos theta|) omega, alpha a |sin theta| zeta / 4), a),
which satisfies d(n0^{-1} gamma(a)) = alpha a exactly.  On the abelian boundary
(k = 0) the ray is (n0 + alpha a omega, a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .htype import HTypeGroup, NPoint, SPoint, sample_unit_sphere
from .measures import LimitEstimate, estimate_limit
from .rng import make_rng, pmap


@dataclass(frozen=True)
class Ray:
    n0: NPoint
    alpha: float
    omega: np.ndarray
    zeta: np.ndarray | None = None
    theta: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("ray aperture must be positive")
        om = np.asarray(self.omega, float).reshape(-1)
        if abs(np.linalg.norm(om) - 1) > 1e-12:
            raise ValueError("omega must be a unit vector")
        object.__setattr__(self, "omega", om)
        if self.zeta is None or np.size(self.zeta) == 0:
            object.__setattr__(self, "zeta", np.zeros(0))
        else:
            ze = np.asarray(self.zeta, float).reshape(-1)
            if abs(np.linalg.norm(ze) - 1) > 1e-12:
                raise ValueError("zeta must be a unit vector")
            object.__setattr__(self, "zeta", ze)
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))


@dataclass(frozen=True)
class Cap:
    """Open spherical cap {v : angle(v, center) < radius} on the unit sphere."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, float).reshape(-1)
        nrm = np.linalg.norm(c)
        if nrm == 0:
            raise ValueError("cap center must be non-zero")
        object.__setattr__(self, "center", c / nrm)
        if not self.radius > 0:
            raise ValueError("cap radius must be positive")

    def contains(self, v) -> bool:
        v = np.asarray(v, float)
        cosang = float(v @ self.center) / float(np.linalg.norm(v))
        return math.acos(max(-1.0, min(1.0, cosang))) < self.radius

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        m = self.center.size
        if m == 1 or self.radius >= math.pi:
            if m == 1:
                return self.center.copy() if self.radius <= math.pi else rng.choice([-1.0, 1.0], 1)
            v = rng.normal(size=m)
            return v / np.linalg.norm(v)
        # polar angle density ~ sin^{m-2}(phi) on [0, radius), by rejection
        smax = 1.0 if self.radius > math.pi / 2 else math.sin(self.radius)
        while True:
            phi = rng.uniform(0.0, self.radius)
            if m == 2 or rng.uniform() < (math.sin(phi) / smax) ** (m - 2):
                break
        w = rng.normal(size=m)
        w -= (w @ self.center) * self.center
        w /= np.linalg.norm(w)
        return math.cos(phi) * self.center + math.sin(phi) * w


@dataclass(frozen=True)
class Sector:
    alpha: float
    cap1: Cap
    cap2: Cap | None
    theta_interval: tuple
    n0: NPoint

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("sector aperture must be positive")
        lo, hi = self.theta_interval
        if not 0 <= lo < hi <= 2 * math.pi:
            raise ValueError("theta interval must be a non-empty subinterval of [0, 2 pi)")


@dataclass(frozen=True)
class AdmissibleDomain:
    n0: NPoint
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("aperture must be positive")


@dataclass(frozen=True)
class Schedule:
    """Geometric sampling a_j = a0 * ratio^j, j < steps, with Cauchy tolerance tol."""

    a0: float = 0.1
    ratio: float = 0.5
    steps: int = 12
    tol: float = 1e-3

    def __post_init__(self):
        if not (self.a0 > 0 and 0 < self.ratio < 1 and self.steps >= 3 and self.tol > 0):
            raise ValueError("schedule needs a0 > 0, 0 < ratio < 1, steps >= 3, tol > 0")

    def grid(self) -> np.ndarray:
        return self.a0 * self.ratio ** np.arange(self.steps)

    def to_dict(self) -> dict:
        return {"a0": self.a0, "ratio": self.ratio, "steps": self.steps, "tol": self.tol}


def ray_point(g: HTypeGroup, ray: Ray, a: float) -> SPoint:
    if not a > 0:
        raise ValueError("a must be positive")
    t = ray.alpha * a
    if g.k == 0:
        X, Z = t * ray.omega, np.zeros(0)
    else:
        X = math.sqrt(t * abs(math.cos(ray.theta))) * ray.omega
        Z = 0.25 * t * abs(math.sin(ray.theta)) * ray.zeta
    X, Z = g.mul(ray.n0.X, ray.n0.Z, X, Z)
    return SPoint(NPoint(X, Z), float(a))


def in_admissible(g: HTypeGroup, dom: AdmissibleDomain, x: SPoint) -> bool:
    """Strict membership d(n0^{-1} n) < alpha a (with a relative rounding margin)."""
    X, Z = g.mul(-dom.n0.X, -dom.n0.Z, x.n.X, x.n.Z)
    return float(g.norm(X, Z)) < dom.alpha * x.a * (1 - 1e-12)


def limit_along_ray(g: HTypeGroup, F, ray: Ray, schedule: Schedule | None = None) -> LimitEstimate:
    schedule = schedule or Schedule()
    grid = schedule.grid()
    vals = [complex(F(ray_point(g, ray, float(a)))) for a in grid]
    return estimate_limit(grid, vals, schedule.tol)


def sample_rays(g: HTypeGroup, sector: Sector, count: int, seed: int = 0) -> list:
    rays = []
    lo, hi = sector.theta_interval
    for i in range(count):
        rng = make_rng(seed, 21, i)
        omega = sector.cap1.sample(rng)
        zeta = sector.cap2.sample(rng) if (g.k and sector.cap2 is not None) else None
        theta = rng.uniform(lo, hi) if g.k else 0.0
        rays.append(Ray(sector.n0, sector.alpha, omega, zeta, theta))
    return rays


def _combine(estimates, tol: float, diagnostics: dict) -> LimitEstimate:
    vals = np.array([e.value for e in estimates])
    value = complex(np.mean(vals))
    spread = float(np.max(np.abs(vals - value))) / max(1.0, abs(value))
    conv = all(e.converged for e in estimates) and spread <= tol
    last = max([spread] + [e.last_delta for e in estimates])
    diagnostics = dict(diagnostics, spread=spread)
    return LimitEstimate(value, conv, last, [], diagnostics)


def sectorial_limit(g: HTypeGroup, F, sector: Sector, ray_sample_count: int = 8, seed: int = 0,
                    schedule: Schedule | None = None) -> LimitEstimate:
    """Common radial limit over rays drawn uniformly from the sector."""
    schedule = schedule or Schedule()
    rays = sample_rays(g, sector, ray_sample_count, seed)
    ests = pmap(lambda r: limit_along_ray(g, F, r, schedule), rays)
    out = _combine(ests, schedule.tol, {"rays": [
        {"theta": r.theta, "value": e.value, "converged": e.converged} for r, e in zip(rays, ests)
    ]})
    out.samples = [(i, r.theta, a, v) for i, (r, e) in enumerate(zip(rays, ests)) for a, v in e.samples]
    return out


def _sequence(g: HTypeGroup, n0: NPoint, alpha: float, grid, kind: str, rng) -> list:
    pts = []
    Xs, Zs = sample_unit_sphere(g, len(grid), rng)
    for j, a in enumerate(grid):
        if kind == "axial":
            pts.append(SPoint(n0, float(a)))
            continue
        i = 0 if kind == "boundary" else j
        t = 0.99 if kind == "boundary" else rng.uniform(0.0, 0.99)
        X, Z = g.dil(np.array(t * alpha * a), Xs[i], Zs[i])
        X, Z = g.mul(n0.X, n0.Z, X, Z)
        pts.append(SPoint(NPoint(X, Z), float(a)))
    return pts


def admissible_scan(g: HTypeGroup, F, n0: NPoint, apertures=(0.5, 1.0, 2.0), sequence_count: int = 5,
                    seed: int = 0, schedule: Schedule | None = None) -> LimitEstimate:
    """Limits of F along in-cone sequences for several apertures.

    Each aperture gets an axial sequence, a boundary-hugging one (d = 0.99 alpha a
    in a fixed direction) and random in-cone sequences.  Converged iff every
    sequence converges and all limits agree within the schedule tolerance.
    """
    schedule = schedule or Schedule()
    grid = schedule.grid()
    jobs = []
    for ia, alpha in enumerate(apertures):
        kinds = ["axial", "boundary"] + ["random"] * max(0, sequence_count - 2)
        for js, kind in enumerate(kinds[:max(sequence_count, 1)]):
            rng = make_rng(seed, 31, ia, js)
            jobs.append((alpha, kind, _sequence(g, n0, alpha, grid, kind, rng)))

    def run(job):
        vals = [complex(F(x)) for x in job[2]]
        return estimate_limit(grid, vals, schedule.tol)

    ests = pmap(run, jobs)
    per_aperture = []
    for alpha in apertures:
        sub = [e for (al, _, _), e in zip(jobs, ests) if al == alpha]
        c = _combine(sub, schedule.tol, {})
        per_aperture.append({"alpha": alpha, "value": c.value, "converged": c.converged,
                             "spread": c.diagnostics["spread"]})
    return _combine(ests, schedule.tol, {"apertures": per_aperture})


# -- Fatou experiment -------------------------------------------------------------


def default_sector(g: HTypeGroup, n0: NPoint, alpha: float = 1.0, seed: int = 0,
                   radius: float = math.pi / 8) -> Sector:
    rng = make_rng(seed, 41)
    c1 = rng.normal(size=g.dim_v)
    cap2 = None
    if g.k:
        cap2 = Cap(rng.normal(size=g.k), radius)
    th = rng.uniform(radius, 2 * math.pi - radius)
    return Sector(alpha, Cap(c1, radius), cap2, (th - radius, th + radius), n0)


@dataclass
class FatouConfig:
    sector: Sector | None = None
    schedule: Schedule = field(default_factory=Schedule)
    apertures: tuple = (0.5, 1.0, 2.0)
    ray_count: int = 8
    sequence_count: int = 5
    seed: int = 0
    t0: float = 1.0
    agreement_tol: float = 0.02
    quad: object = None


@dataclass
class FatouReport:
    report: dict
    trace: list

    @property
    def verdict(self) -> str:
        return self.report["verdict"]


def _estimate_dict(e: LimitEstimate | None, error: str | None = None) -> dict:
    if e is None:
        return {"value": None, "converged": False, "last_delta": None, "error": error}
    out = {"value": [e.value.real, e.value.imag], "converged": bool(e.converged),
           "last_delta": e.last_delta}
    for k in ("apertures", "spread"):
        if k in e.diagnostics:
            out[k] = e.diagnostics[k]
    return out


def _close(u: complex, v: complex, tol: float) -> bool:
    return abs(u - v) <= tol * max(1.0, abs(u), abs(v))


def fatou_experiment(g: HTypeGroup, param, mu, n0: NPoint, config: FatouConfig | None = None) -> FatouReport:
    """Run (H1), the sectorial limit, the admissible scan and the strong derivative
    for Q_{i beta}[mu] at n0, and judge their mutual consistency.

    Verdicts: "consistent" (all limits exist and agree), "no-limit" (neither the
    sectorial limit nor the strong derivative exists), "h1-fails", and
    "inconsistent" (the conclusion fails although (H1) holds).  Errors of any
    sub-step are recorded, never dropped.
    """
    from .measures import check_H1, strong_derivative
    from .transform import q_transform

    cfg = config or FatouConfig()
    sector = cfg.sector or default_sector(g, n0, seed=cfg.seed)
    errors = {}

    def F(x):
        return q_transform(g, param, mu, x, cfg.quad, strict=True)

    def guarded(name, fn):
        try:
            return fn()
        except Exception as exc:  # recorded in the report
            errors[name] = f"{type(exc).__name__}: {exc}"
            return None

    h1 = guarded("h1", lambda: check_H1(g, mu, n0, cfg.t0, quad=cfg.quad))
    sect = guarded("sectorial", lambda: sectorial_limit(g, F, sector, cfg.ray_count, cfg.seed,
                                                        cfg.schedule))
    adm = guarded("admissible", lambda: admissible_scan(g, F, n0, cfg.apertures,
                                                        cfg.sequence_count, cfg.seed, cfg.schedule))
    sd = guarded("strong_derivative", lambda: strong_derivative(g, mu, n0, quad=cfg.quad,
                                                                tol=cfg.agreement_tol))

    tol = cfg.agreement_tol
    if errors:
        verdict = "error"
    elif not h1[0]:
        verdict = "h1-fails"
    elif sect.converged:
        ok = adm.converged and _close(adm.value, sect.value, tol)
        ok = ok and sd.converged and _close(sd.value, sect.value, tol)
        verdict = "consistent" if ok else "inconsistent"
    else:
        verdict = "inconsistent" if sd.converged else "no-limit"

    report = {
        "h1": None if h1 is None else {"bounded": bool(h1[0]), "sup": float(h1[1])},
        "sectorial": _estimate_dict(sect, errors.get("sectorial")),
        "admissible": _estimate_dict(adm, errors.get("admissible")),
        "strong_derivative": _estimate_dict(sd, errors.get("strong_derivative")),
        "verdict": verdict,
        "calibration": {"beta": param.beta, "c_beta": param.c_beta, "c_pk": param.c_pk},
        "errors": errors,
    }
    trace = [] if sect is None else [
        {"ray_id": i, "theta": th, "a": a, "value_re": v.real, "value_im": v.imag}
        for i, th, a, v in sect.samples
    ]
    return FatouReport(report, trace)
