"""Integration over N in homogeneous polar coordinates.

Every integral is written as

    int_{r_min < d(n) < r_max} F(n) dm(n) = int R^{Q-1} int_Sigma F(delta_R sigma) dsigma dR

where Sigma = {d = 1}.  Two engines share this contract:

* ``adaptive_tensor`` (dim <= 3): globally adaptive Clenshaw-Curtis panels in R
  (with an algebraic map for the unbounded tail) times a nested tensor rule on
  Sigma.  The one dimensional case is delegated to QUADPACK with breakpoints.
* ``monte_carlo``: seeded sampling, either cone-measure x radial sampling of a
  shell or importance sampling from a kernel-shaped Student-t proposal.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .htype import HTypeGroup, sample_unit_ball, sphere_area, unit_ball_volume
from .rng import make_rng

ENGINES = ("adaptive_tensor", "monte_carlo")


class QuadratureError(RuntimeError):
    """An integral did not reach its tolerance within the evaluation budget."""


@dataclass(frozen=True)
class QuadratureSpec:
    engine: str = "adaptive_tensor"
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_evals: int = 4_000_000
    truncation_radius: float = 16.0
    seed: int = 0

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown quadrature engine {self.engine!r}; expected one of {ENGINES}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if not self.truncation_radius > 0:
            raise ValueError("truncation_radius must be positive")

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_evals": self.max_evals,
            "truncation_radius": self.truncation_radius,
            "seed": self.seed,
        }

    def with_(self, **kw) -> "QuadratureSpec":
        d = self.to_dict()
        d.update(kw)
        return QuadratureSpec(**d)


@dataclass(frozen=True)
class Estimate:
    value: complex
    error: float
    evals: int

    def ok(self, quad: QuadratureSpec) -> bool:
        return self.error <= max(quad.abs_tol, quad.rel_tol * abs(self.value))


def clenshaw_curtis(n: int):
    """Nodes and weights of the (n+1)-point Clenshaw-Curtis rule on [-1, 1], n even."""
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    w = np.zeros(n + 1)
    kk = np.arange(1, n // 2 + 1)
    b = np.where(kk == n // 2, 1.0, 2.0)
    for i in range(n + 1):
        s = np.sum(b / (4 * kk**2 - 1) * np.cos(2 * kk * i * np.pi / n))
        c = 1.0 if i in (0, n) else 2.0
        w[i] = c / n * (1.0 - s)
    return x, w


_CC_CACHE: dict = {}


def _cc(n):
    if n not in _CC_CACHE:
        _CC_CACHE[n] = clenshaw_curtis(n)
    return _CC_CACHE[n]


# -- angular rules on Sigma ---------------------------------------------------


def _heisenberg1_sphere(n_psi: int, n_phi: int):
    """Nested rule on {|X|^4 + 16 Z^2 = 1} for heisenberg:1.

    sigma(psi, phi) = (cos psi e(phi), h(psi)/4), h = sin psi sqrt(1 + cos^2 psi),
    which is smooth through the poles; dsigma = J(psi)/8 dpsi dphi.
    Returns points, weights, and the two half-resolution weight vectors
    (zero on the nodes a sub-rule does not use).
    """
    xc, wc = _cc(n_psi)
    psi = 0.5 * np.pi * xc
    wpsi = 0.5 * np.pi * wc
    _, wc_half = _cc(n_psi // 2)
    wpsi_half = np.zeros_like(wpsi)
    wpsi_half[::2] = 0.5 * np.pi * wc_half
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2 * np.pi / n_phi)
    wphi_half = np.zeros(n_phi)
    wphi_half[::2] = 4 * np.pi / n_phi

    c, s = np.cos(psi), np.sin(psi)
    root = np.sqrt(1 + c * c)
    h = s * root
    dh = 2 * c**3 / root
    jac = (c * c * dh + 2 * c * s * h) / 8.0

    P, F = np.meshgrid(np.arange(psi.size), np.arange(n_phi), indexing="ij")
    P, F = P.ravel(), F.ravel()
    X = np.stack([c[P] * np.cos(phi[F]), c[P] * np.sin(phi[F])], axis=-1)
    Z = (0.25 * h[P])[:, None]
    w = jac[P] * wpsi[P] * wphi[F]
    w_psi_half = jac[P] * wpsi_half[P] * wphi[F]
    w_phi_half = jac[P] * wpsi[P] * wphi_half[F]
    return X, Z, w, w_psi_half, w_phi_half


def _euclidean_sphere(dim: int, n_psi: int, n_phi: int):
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2 * np.pi / n_phi)
    wphi_half = np.zeros(n_phi)
    wphi_half[::2] = 4 * np.pi / n_phi
    if dim == 2:
        X = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return X, np.zeros((n_phi, 0)), wphi, wphi.copy(), wphi_half
    # dim 3: u = cos(theta) on Clenshaw-Curtis nodes
    u, wu = _cc(n_psi)
    _, wu_half_c = _cc(n_psi // 2)
    wu_half = np.zeros_like(wu)
    wu_half[::2] = wu_half_c
    P, F = np.meshgrid(np.arange(u.size), np.arange(n_phi), indexing="ij")
    P, F = P.ravel(), F.ravel()
    sn = np.sqrt(np.clip(1 - u * u, 0, None))
    X = np.stack([sn[P] * np.cos(phi[F]), sn[P] * np.sin(phi[F]), u[P]], axis=-1)
    return (X, np.zeros((X.shape[0], 0)), wu[P] * wphi[F], wu_half[P] * wphi[F],
            wu[P] * wphi_half[F])


def _sphere_rule(g: HTypeGroup, n_psi: int, n_phi: int):
    if g.k == 0 and g.dim_v in (2, 3):
        return _euclidean_sphere(g.dim_v, n_psi, n_phi)
    if g.k == 1 and g.dim_v == 2:
        return _heisenberg1_sphere(n_psi, n_phi)
    raise ValueError(
        f"adaptive_tensor handles groups of dimension <= 3, not {g.name}; use monte_carlo"
    )


# -- radial panels ------------------------------------------------------------

_RADIAL_N = 16


class _Panel:
    __slots__ = ("lo", "hi", "tail", "value", "err", "ang_psi", "ang_phi")


def _tensor(g, F, quad, r_min, r_max, scale, tail_exponent, n_ang):
    Xs, Zs, w, w_psi, w_phi = _sphere_rule(g, *n_ang)
    xr, wr = _cc(_RADIAL_N)
    _, wr_half_c = _cc(_RADIAL_N // 2)
    wr_half = np.zeros_like(wr)
    wr_half[::2] = wr_half_c
    Q = g.Q
    R_T = max(quad.truncation_radius * scale, r_min)
    evals = 0

    def eval_panel(lo, hi, tail):
        nonlocal evals
        t = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xr
        jt = 0.5 * (hi - lo)
        if tail:
            # R = R_T w^{-1/gamma}; w in (0, 1]; the node w = 0 carries R = inf
            finite = t > 0
            wv = np.where(finite, t, 1.0)
            R = R_T * wv ** (-1.0 / tail_exponent)
            dR = R_T / tail_exponent * wv ** (-1.0 / tail_exponent - 1.0)
        else:
            R = t
            dR = np.ones_like(t)
            finite = np.ones_like(t, dtype=bool)
        Rf = R[finite]
        X, Z = g.dil(Rf[:, None], Xs[None], Zs[None])
        vals = np.zeros((t.size, w.size), dtype=complex)
        vals[finite] = F(X, Z)
        evals += Rf.size * w.size
        radial = np.zeros(t.size)
        radial[finite] = Rf ** (Q - 1) * dR[finite]
        ang = vals @ w
        ang_psi = vals @ w_psi
        ang_phi = vals @ w_phi
        full = jt * np.sum(wr * radial * ang)
        half = jt * np.sum(wr_half * radial * ang)
        p = _Panel()
        p.lo, p.hi, p.tail = lo, hi, tail
        p.value = full
        p.err = abs(full - half)
        p.ang_psi = full - jt * np.sum(wr * radial * ang_psi)
        p.ang_phi = full - jt * np.sum(wr * radial * ang_phi)
        return p

    breaks = []
    upper = R_T if math.isinf(r_max) else r_max
    if upper > r_min:
        lo_geo = max(r_min, scale * 2.0**-10)
        b = [r_min]
        r = scale * 2.0**-10
        while r < upper:
            if r > b[-1]:
                b.append(r)
            r *= 2.0
        b.append(upper)
        if lo_geo > r_min and b[1] != lo_geo and lo_geo < upper:
            b.insert(1, lo_geo)
        b = sorted(set(b))
        breaks = [(b[i], b[i + 1], False) for i in range(len(b) - 1)]
    if math.isinf(r_max):
        breaks.append((0.0, 1.0, True))

    panels = [eval_panel(*b) for b in breaks]
    heap = [(-p.err, i) for i, p in enumerate(panels)]
    heapq.heapify(heap)
    alive = {i: p for i, p in enumerate(panels)}
    nxt = len(panels)
    while True:
        total = sum(p.value for p in alive.values())
        err = sum(p.err for p in alive.values())
        if err <= max(quad.abs_tol, quad.rel_tol * abs(total)) or evals >= quad.max_evals:
            break
        _, i = heapq.heappop(heap)
        p = alive.pop(i)
        mid = 0.5 * (p.lo + p.hi)
        for lo, hi in ((p.lo, mid), (mid, p.hi)):
            c = eval_panel(lo, hi, p.tail)
            alive[nxt] = c
            heapq.heappush(heap, (-c.err, nxt))
            nxt += 1
    ang_err = abs(sum(p.ang_psi for p in alive.values())) + abs(
        sum(p.ang_phi for p in alive.values())
    )
    return total, err, ang_err, evals


def _tensor_adaptive(g, F, quad, r_min, r_max, scale, tail_exponent):
    n_ang = (16, 16) if g.k else (16, 32)
    evals = 0
    while True:
        total, rad_err, ang_err, ev = _tensor(g, F, quad, r_min, r_max, scale, tail_exponent, n_ang)
        evals += ev
        tol = max(quad.abs_tol, quad.rel_tol * abs(total))
        if ang_err <= tol or evals >= quad.max_evals or n_ang[0] >= 256:
            return Estimate(total, rad_err + ang_err, evals)
        n_ang = (2 * n_ang[0], 2 * n_ang[1])


def _line(g, F, quad, r_min, r_max, jumps):
    """One dimensional integral over r_min < |x| < r_max with breakpoints."""
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return complex(F(np.array([[x]]), np.zeros((1, 0)))[0])

    pts = sorted({float(j) for j in jumps if r_min < abs(j) < r_max})
    segs = []
    for sign in (1.0, -1.0):
        inner = [sign * p for p in pts if sign * p > 0]
        edges = [r_min] + sorted(inner) + [r_max]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                segs.append((sign, lo, hi))
    total, err = 0j, 0.0
    for sign, lo, hi in segs:
        kw = dict(epsabs=quad.abs_tol / 4, epsrel=quad.rel_tol / 4, limit=500, complex_func=True)
        if math.isinf(hi) and lo == 0:
            # split at 1 so the infinite transform sees a smooth piece
            v1, e1 = integrate.quad(lambda x: f(sign * x), 0.0, 1.0, **kw)[:2]
            v2, e2 = integrate.quad(lambda x: f(sign * x), 1.0, hi, **kw)[:2]
            v, e = v1 + v2, e1 + e2
        else:
            v, e = integrate.quad(lambda x: f(sign * x), lo, hi, **kw)[:2]
        total += v
        err += abs(e) if np.isscalar(e) else float(np.hypot(*e))
    return Estimate(total, err, evals)


# -- Monte Carlo ----------------------------------------------------------------

_BATCH = 1 << 15


def kernel_proposal_norm(g: HTypeGroup, beta: float) -> float:
    """Closed-form int_N (16 + 8|X|^2 + d^2)^{-(rho+beta)} dm (or (1+|x|^2)^{...} if k = 0).

    Only used as the density of the Monte Carlo proposal.
    """
    if g.k == 0:
        d = g.dim_v
        return math.pi ** (d / 2) * math.gamma(beta) / math.gamma(d / 2 + beta)
    p, k = g.dim_v // 2, g.k
    gam = g.rho + beta
    m = p + 2 * beta
    lz = -k * math.log(4) + 0.5 * k * math.log(math.pi) + special.gammaln(gam - k / 2) - special.gammaln(gam)
    lx = p * math.log(math.pi) + (p - m) * math.log(4) + special.gammaln(m - p) - special.gammaln(m)
    return math.exp(lz + lx)


def _sample_kernel(g, beta, size, rng):
    """Exact samples of the density proportional to the beta-kernel at a = 1."""
    if g.k == 0:
        nu = 2 * beta
        Y = rng.standard_normal((size, g.dim_v)) / np.sqrt(rng.chisquare(nu, size) / nu)[:, None]
        return Y / np.sqrt(nu), np.zeros((size, 0))
    p, k = g.dim_v // 2, g.k
    nu1 = 4 * beta
    Y = rng.standard_normal((size, g.dim_v)) / np.sqrt(rng.chisquare(nu1, size) / nu1)[:, None]
    X = 2 * Y / math.sqrt(nu1)
    nu2 = p + 2 * beta
    W = rng.standard_normal((size, k)) / np.sqrt(rng.chisquare(nu2, size) / nu2)[:, None]
    s = np.sum(X * X, axis=-1)
    Z = ((4 + s) / 4)[:, None] * W / math.sqrt(nu2)
    return X, Z


def kernel_shape(g: HTypeGroup, X, Z, beta: float):
    """(16 + 8|X|^2 + d^2)^{-(rho+beta)}; for k = 0, (1 + |x|^2)^{-(rho+beta)}."""
    x2 = np.sum(X * X, axis=-1)
    if g.k == 0:
        base = 1.0 + x2
    else:
        base = 16.0 + 8.0 * x2 + x2 * x2 + 16.0 * np.sum(Z * Z, axis=-1)
    return np.exp(-(g.rho + beta) * np.log(base))


def _mc(g, F, quad, r_min, r_max, scale, tail_exponent):
    n = quad.max_evals
    batches = max(1, -(-n // _BATCH))
    sums = np.zeros(2, dtype=complex)
    sq = 0.0
    count = 0
    if math.isinf(r_max):
        beta_p = tail_exponent / 2
        norm = kernel_proposal_norm(g, beta_p)
    else:
        V = unit_ball_volume(g)
        shell = V * (r_max**g.Q - r_min**g.Q)
    for b in range(batches):
        rng = make_rng(quad.seed, 7, b)
        m = min(_BATCH, n - b * _BATCH)
        if math.isinf(r_max):
            X, Z = _sample_kernel(g, beta_p, m, rng)
            dens = kernel_shape(g, X, Z, beta_p) / norm / scale**g.Q
            X, Z = g.dil(np.full(m, scale), X, Z)
            vals = np.asarray(F(X, Z), dtype=complex) / dens
            if r_min > 0:
                vals = np.where(g.norm(X, Z) > r_min, vals, 0.0)
        else:
            Xs, Zs = sample_unit_ball(g, m, rng)
            d = g.norm(Xs, Zs)
            sig_X, sig_Z = g.dil(1.0 / d, Xs, Zs)
            U = rng.uniform(size=m)
            R = (r_min**g.Q + U * (r_max**g.Q - r_min**g.Q)) ** (1.0 / g.Q)
            X, Z = g.dil(R, sig_X, sig_Z)
            vals = shell * np.asarray(F(X, Z), dtype=complex)
        sums[0] += vals.sum()
        sq += float(np.sum(np.abs(vals) ** 2))
        count += m
    mean = sums[0] / count
    var = max(sq / count - abs(mean) ** 2, 0.0)
    return Estimate(mean, math.sqrt(var / count), count)


def integrate_n(
    g: HTypeGroup,
    F,
    quad: QuadratureSpec,
    *,
    r_min: float = 0.0,
    r_max: float = math.inf,
    scale: float = 1.0,
    tail_exponent: float = 1.0,
    jumps=(),
) -> Estimate:
    """Integrate ``F(X, Z)`` over the shell r_min < d(n) < r_max.

    ``scale`` is the length (in d units) where F concentrates, ``tail_exponent``
    the excess decay gamma in |F| ~ d^{-Q-gamma}, and ``jumps`` lists hyperplanes
    X_1 = c where F is discontinuous (honoured exactly in dimension 1).
    """
    if not r_max > r_min >= 0:
        raise ValueError("need 0 <= r_min < r_max")
    if quad.engine == "monte_carlo":
        return _mc(g, F, quad, r_min, r_max, scale, tail_exponent)
    if g.dim == 1:
        return _line(g, F, quad, r_min, r_max, jumps)
    return _tensor_adaptive(g, F, quad, r_min, r_max, scale, tail_exponent)


def integrate_ball(g: HTypeGroup, F, quad: QuadratureSpec, center_X, center_Z, r: float,
                   jumps=()) -> Estimate:
    """int_{B(center, r)} F dm = r^Q int_{B(0,1)} F(center . delta_r u) du."""
    cX = np.asarray(center_X, float)
    cZ = np.asarray(center_Z, float)

    def G(X, Z):
        Xd, Zd = g.dil(np.full(X.shape[:-1], r), X, Z)
        Xn, Zn = g.mul(np.broadcast_to(cX, Xd.shape), np.broadcast_to(cZ, Zd.shape), Xd, Zd)
        return F(Xn, Zn)

    # ball jumps map x1 = c to u1 = (c - center)/r (only meaningful in dim 1)
    mapped = [(c - (cX[0] if cX.size else 0.0)) / r for c in jumps]
    est = integrate_n(g, G, quad, r_min=0.0, r_max=1.0, jumps=mapped)
    fac = r**g.Q
    return Estimate(est.value * fac, est.error * fac, est.evals)


def radial_mass(g: HTypeGroup, profile, tail_exponent: float, rel_tol: float = 1e-12,
                truncation_radius: float = 16.0) -> float:
    """int_N f dm for f depending only on (|X|, |Z|), by nested QUADPACK.

    ``profile(r, t)`` takes r = |X| and t = |Z|.  The (r, t) quarter plane is
    swept in homogeneous polar coordinates, |X|^2 = R cos^2 psi and
    |Z| = R h(psi) / 4, and R beyond ``truncation_radius`` is mapped to
    w = (R / R_T)^{-tail_exponent} so that slowly decaying tails stay finite.
    """
    kw = dict(epsabs=0.0, epsrel=rel_tol, limit=400)
    R_T = truncation_radius
    gam = tail_exponent
    cX = sphere_area(g.dim_v)
    if g.k == 0:
        d = g.dim_v

        def radial(R):
            return cX * R ** (d - 1) * profile(R, 0.0)
    else:
        p, k = g.dim_v // 2, g.k
        const = 0.5 * cX * sphere_area(k) * 0.25

        def ang(psi, R):
            c, s = math.cos(psi), math.sin(psi)
            root = math.sqrt(1 + c * c)
            h = s * root
            jac = c * c * (2 * c**3 / root) + 2 * c * s * h
            ss = R * c * c
            t = 0.25 * R * h
            return const * ss ** (p - 1) * t ** (k - 1) * R * jac * profile(math.sqrt(ss), t)

        def radial(R):
            return integrate.quad(ang, 0.0, 0.5 * math.pi, args=(R,), **kw)[0]

    def tail(w):
        if w <= 0:
            return 0.0
        R = R_T * w ** (-1.0 / gam)
        return radial(R) * R_T / gam * w ** (-1.0 / gam - 1.0)

    inner = integrate.quad(radial, 0.0, 1.0, **kw)[0] + integrate.quad(radial, 1.0, R_T, **kw)[0]
    return inner + integrate.quad(tail, 0.0, 1.0, **kw)[0]
