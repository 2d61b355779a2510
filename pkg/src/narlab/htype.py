"""H-type groups in exponential coordinates.

A point of N is a pair (X, Z) with X in R^{2p} and Z in R^k.  The bracket is
encoded by skew-symmetric matrices J_1..J_k through <[X, X'], e_r> = <J_r X, X'>.
All array helpers accept leading batch dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .rng import make_rng


@dataclass(frozen=True)
class NPoint:
    """Boundary point (X, Z) of N."""

    X: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float).reshape(-1))
        object.__setattr__(self, "Z", np.asarray(self.Z, dtype=float).reshape(-1))

    def __eq__(self, other):
        if not isinstance(other, NPoint):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.Z, other.Z)

    def __hash__(self):
        return hash((self.X.tobytes(), self.Z.tobytes()))

    def to_dict(self) -> dict:
        return {"X": self.X.tolist(), "Z": self.Z.tolist()}


@dataclass(frozen=True)
class SPoint:
    """Interior point (n, a) of S = NA."""

    n: NPoint
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")


@dataclass(frozen=True, eq=False)
class HTypeGroup:
    """An H-type group N together with the derived homogeneous constants.

    ``k == 0`` encodes the abelian boundary R^dim of real hyperbolic space,
    which carries the isotropic dilation and the Euclidean norm.
    """

    name: str
    p: int
    k: int
    jmaps: np.ndarray
    dim_v: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def Q(self) -> int:
        # abelian: homogeneous dimension is the Euclidean one
        return self.dim_v if self.k == 0 else self.p + self.k

    @property
    def rho(self) -> float:
        return self.Q / 2

    @property
    def dim(self) -> int:
        return self.dim_v + self.k

    @property
    def abelian(self) -> bool:
        return self.k == 0

    def identity(self) -> NPoint:
        return NPoint(np.zeros(self.dim_v), np.zeros(self.k))

    def point(self, X=None, Z=None) -> NPoint:
        X = np.zeros(self.dim_v) if X is None else X
        Z = np.zeros(self.k) if Z is None else Z
        n = NPoint(X, Z)
        _check_point(self, n)
        return n

    def unit_ball_volume(self, quad=None) -> float:
        return unit_ball_volume(self, quad)

    def tau_estimate(self) -> float:
        return estimate_tau(self)

    # -- vectorized kernels -------------------------------------------------

    def bracket(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        """Components <J_r X1, X2>, shape (..., k)."""
        if self.k == 0:
            return np.zeros(np.broadcast_shapes(X1.shape, X2.shape)[:-1] + (0,))
        JX1 = np.einsum("rij,...j->...ri", self.jmaps, X1)
        return np.einsum("...ri,...i->...r", JX1, X2)

    def mul(self, X1, Z1, X2, Z2):
        return X1 + X2, Z1 + Z2 + 0.5 * self.bracket(X1, X2)

    def dil(self, a, X, Z):
        a = np.asarray(a, dtype=float)[..., None]
        if self.k == 0:
            return a * X, Z
        return np.sqrt(a) * X, a * Z

    def norm(self, X, Z) -> np.ndarray:
        x2 = np.sum(X * X, axis=-1)
        if self.k == 0:
            return np.sqrt(x2)
        return np.sqrt(x2 * x2 + 16.0 * np.sum(Z * Z, axis=-1))


def _rotation_blocks(p: int) -> np.ndarray:
    J = np.zeros((2 * p, 2 * p))
    for b in range(p):
        i, j = 2 * b, 2 * b + 1
        J[j, i] = 1.0
        J[i, j] = -1.0
    return J


def _quaternion_blocks(m: int) -> np.ndarray:
    # left multiplication by i, j, k on H = R^4, basis (1, i, j, k)
    Li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
    Lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], float)
    Lk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], float)
    eye = np.eye(m)
    return np.stack([np.kron(eye, L) for L in (Li, Lj, Lk)])


def make_group(preset: str) -> HTypeGroup:
    """Build a group from a preset string ``"heisenberg:p"``, ``"quaternionic:p"``
    or ``"abelian:d"``."""
    try:
        kind, _, arg = preset.partition(":")
        size = int(arg)
    except ValueError:
        raise ValueError(f"malformed group preset {preset!r}") from None
    if size < 1:
        raise ValueError(f"group dimension must be >= 1, got {size}")
    if kind == "heisenberg":
        jmaps = _rotation_blocks(size)[None]
        return HTypeGroup(preset, size, 1, jmaps, 2 * size)
    if kind == "quaternionic":
        if (2 * size) % 4:
            raise ValueError("quaternionic preset requires 2p divisible by 4")
        return HTypeGroup(preset, size, 3, _quaternion_blocks(size // 2), 2 * size)
    if kind == "abelian":
        # p is nominal here; dim v = d
        return HTypeGroup(preset, size, 0, np.zeros((0, size, size)), size)
    raise ValueError(
        f"unknown group preset {preset!r}; expected heisenberg:p, quaternionic:p or abelian:d"
    )


def htype_defect(g: HTypeGroup) -> float:
    """max |J_r J_s + J_s J_r + 2 delta_rs I| over the basis, plus skewness defect."""
    if g.k == 0:
        return 0.0
    eye = np.eye(g.dim_v)
    worst = max(np.max(np.abs(J + J.T)) for J in g.jmaps)
    for r in range(g.k):
        for s in range(g.k):
            A = g.jmaps[r] @ g.jmaps[s] + g.jmaps[s] @ g.jmaps[r]
            worst = max(worst, np.max(np.abs(A + 2.0 * (r == s) * eye)))
    return float(worst)


def _check_point(g: HTypeGroup, n: NPoint) -> None:
    if n.X.shape != (g.dim_v,) or n.Z.shape != (g.k,):
        raise ValueError(
            f"point with dims ({n.X.size}, {n.Z.size}) does not belong to {g.name} "
            f"(expects ({g.dim_v}, {g.k}))"
        )


def multiply(g: HTypeGroup, n1: NPoint, n2: NPoint) -> NPoint:
    _check_point(g, n1)
    _check_point(g, n2)
    return NPoint(*g.mul(n1.X, n1.Z, n2.X, n2.Z))


def inverse(g: HTypeGroup, n: NPoint) -> NPoint:
    _check_point(g, n)
    return NPoint(-n.X, -n.Z)


def dilate(g: HTypeGroup, a: float, n: NPoint) -> NPoint:
    if not a > 0:
        raise ValueError(f"dilation factor must be positive, got {a}")
    _check_point(g, n)
    return NPoint(*g.dil(a, n.X, n.Z))


def hnorm(g: HTypeGroup, n: NPoint) -> float:
    _check_point(g, n)
    return float(g.norm(n.X, n.Z))


def quasi_dist(g: HTypeGroup, n1: NPoint, n2: NPoint) -> float:
    """Left-invariant quasi-distance d(n1^{-1} n2)."""
    _check_point(g, n1)
    _check_point(g, n2)
    X, Z = g.mul(-n1.X, -n1.Z, n2.X, n2.Z)
    return float(g.norm(X, Z))


def sample_unit_sphere(g: HTypeGroup, size: int, rng: np.random.Generator):
    """Points with d = 1, distributed by the cone measure of the unit ball."""
    X, Z = sample_unit_ball(g, size, rng)
    d = g.norm(X, Z)
    return g.dil(1.0 / d, X, Z)


def sample_unit_ball(g: HTypeGroup, size: int, rng: np.random.Generator):
    """Uniform samples of B(0, 1) by rejection from its bounding box."""
    zbox = 0.25 if g.k else 0.0
    out_X, out_Z, have = [], [], 0
    while have < size:
        m = max(2 * (size - have), 64)
        X = rng.uniform(-1.0, 1.0, size=(m, g.dim_v))
        Z = rng.uniform(-zbox, zbox, size=(m, g.k))
        keep = g.norm(X, Z) < 1.0
        out_X.append(X[keep])
        out_Z.append(Z[keep])
        have += int(keep.sum())
    return np.concatenate(out_X)[:size], np.concatenate(out_Z)[:size]


def _tau_ratio(g, X1, Z1, X2, Z2):
    X, Z = g.mul(X1, Z1, X2, Z2)
    return g.norm(X, Z) / (g.norm(X1, Z1) + g.norm(X2, Z2))


def estimate_tau(g: HTypeGroup, sample_count: int = 20000, seed: int = 0) -> float:
    """Empirical quasi-triangle constant sup d(n n1) / (d(n) + d(n1)).

    The ratio is dilation invariant, so n is drawn on the unit sphere and n1
    with log-uniform norm.  The best sampled pairs are then polished by a local
    maximizer so that fresh samples do not exceed the returned value.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    key = ("tau", sample_count, seed)
    if key in g._cache:
        return g._cache[key]
    if g.k == 0:
        g._cache[key] = 1.0
        return 1.0
    rng = make_rng(seed)
    X1, Z1 = sample_unit_sphere(g, sample_count, rng)
    X2, Z2 = sample_unit_sphere(g, sample_count, rng)
    r = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=sample_count))
    X2, Z2 = g.dil(r, X2, Z2)
    ratio = _tau_ratio(g, X1, Z1, X2, Z2)
    best = float(ratio.max())

    dv, k = g.dim_v, g.k

    def neg(v):
        x1, z1 = v[:dv], v[dv : dv + k]
        x2, z2 = v[dv + k : 2 * dv + k], v[2 * dv + k :]
        den = g.norm(x1, z1) + g.norm(x2, z2)
        if den < 1e-12:
            return 0.0
        return -float(_tau_ratio(g, x1, z1, x2, z2))

    for i in np.argsort(ratio)[-5:]:
        v0 = np.concatenate([X1[i], Z1[i], X2[i], Z2[i]])
        res = optimize.minimize(neg, v0, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -res.fun)
    tau = max(1.0, best)
    g._cache[key] = tau
    return tau


def sphere_area(m: int) -> float:
    """Surface area of S^{m-1} in R^m (m = 0 gives 1 by convention)."""
    if m == 0:
        return 1.0
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def unit_ball_volume(g: HTypeGroup, quad=None) -> float:
    """Haar measure of B(0, 1), by a radial reduction to a 1-D integral.

    For k >= 1 the ball is {|X|^4 + 16|Z|^2 < 1}; integrating |Z| out leaves
    the profile |S^{2p-1}| |S^{k-1}| / k * r^{2p-1} ((1 - r^4)^{1/2} / 4)^k.
    """
    key = ("ball_volume",)
    if key in g._cache:
        return g._cache[key]
    rel_tol = 1e-12 if quad is None else min(quad.rel_tol, 1e-10)
    if g.k == 0:
        vol = sphere_area(g.dim_v) / g.dim_v
    else:
        cX = sphere_area(g.dim_v)
        cZ = sphere_area(g.k) / g.k

        def profile(r):
            return cX * cZ * r ** (g.dim_v - 1) * (math.sqrt(max(1.0 - r**4, 0.0)) / 4.0) ** g.k

        vol, err = integrate.quad(profile, 0.0, 1.0, epsabs=0.0, epsrel=rel_tol, limit=200)
        if err > 1e3 * rel_tol * vol:
            from .quadrature import QuadratureError

            raise QuadratureError(f"unit ball volume did not converge (err={err:.3e})")
    g._cache[key] = vol
    return vol


def parse_group(spec: str) -> HTypeGroup:
    return make_group(spec)
