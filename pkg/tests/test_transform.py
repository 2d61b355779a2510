import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narlab.htype import NPoint, SPoint, estimate_tau, make_group, sample_unit_ball, unit_ball_volume
from narlab.kernels import calibrate, poisson_p
from narlab.measures import BoundaryMeasure, Density, atom, density_measure, haar
from narlab.quadrature import QuadratureError, QuadratureSpec
from narlab.rng import make_rng
from narlab.transform import (check_H3, finiteness_check, hl_lower_constant, neighborhood_sample,
                              p_transform, q_transform, q_transform_estimate, tail_integral,
                              verify_hl)

from conftest import random_point


@pytest.mark.parametrize("name", ["heisenberg:1", "abelian:1", "abelian:2"])
def test_haar_fixed_point(name):
    g = make_group(name)
    p = calibrate(g, 0.75)
    rng = np.random.default_rng(4)
    for a in (1e-3, 0.1, 1.0, 7.0):
        x = SPoint(random_point(g, rng), a)
        assert q_transform(g, p, haar(g), x) == pytest.approx(1, abs=1e-5)
        assert q_transform(g, p, haar(g, 0.5), x) == pytest.approx(0.5, abs=1e-5)
        assert p_transform(g, p, haar(g), x) == pytest.approx(a ** (g.rho - 0.75), rel=1e-5)


def test_haar_fixed_point_monte_carlo():
    g = make_group("quaternionic:2")
    p = calibrate(g, 1.0)
    quad = QuadratureSpec(engine="monte_carlo", max_evals=50_000, seed=2)
    x = SPoint(random_point(g, np.random.default_rng(1)), 0.3)
    assert q_transform(g, p, haar(g), x, quad) == pytest.approx(1, abs=1e-10)


def test_atom_at_identity(h1):
    p = calibrate(h1, 1.0)
    for a in (0.01, 0.5, 3.0):
        v = q_transform(h1, p, atom(h1.identity()), SPoint(h1.identity(), a))
        assert v == pytest.approx(p.c_beta * a ** (-2 * h1.rho) * 16 ** -(h1.rho + 1.0), rel=1e-13)


def test_atom_p_transform_matches_poisson_power(h1):
    # the lambda-Poisson kernel at lambda = i beta is a power of P_a; the ratio is a-independent
    beta = 0.6
    p = calibrate(h1, beta)
    ratios = []
    for a in (0.05, 0.3, 2.0, 9.0):
        pt = p_transform(h1, p, atom(h1.identity()), SPoint(h1.identity(), a)).real
        ratios.append(pt / poisson_p(h1, p, a, h1.identity()) ** ((h1.rho + beta) / h1.Q))
    assert np.ptp(ratios) / ratios[0] < 1e-12


@settings(max_examples=6)
@given(st.integers(0, 10**6), st.floats(0.01, 3))
def test_linearity(seed, a):
    g = make_group("heisenberg:1")
    p = calibrate(g, 1.0)
    rng = np.random.default_rng(seed)
    m1 = density_measure(g, "gaussian:0.8") + atom(random_point(g, rng, 0.5), 2.0)
    m2 = density_measure(g, "indicator_ball:1.5", 1j)
    c1, c2 = complex(rng.normal(), rng.normal()), rng.normal()
    x = SPoint(random_point(g, rng, 0.5), a)
    quad = QuadratureSpec(rel_tol=1e-4)
    lhs = q_transform(g, p, m1.scaled(c1) + m2.scaled(c2), x, quad)
    rhs = c1 * q_transform(g, p, m1, x, quad) + c2 * q_transform(g, p, m2, x, quad)
    assert abs(lhs - rhs) < 1e-10 * max(1, abs(lhs))


def test_p_q_consistency(h1, rng):
    p = calibrate(h1, 1.3)
    mu = density_measure(h1, "gaussian:1") + atom(h1.point(X=[0.1, 0.2]), 1.0)
    for _ in range(3):
        x = SPoint(random_point(h1, rng), float(np.exp(rng.uniform(-3, 1))))
        q = q_transform(h1, p, mu, x)
        assert x.a ** (1.3 - h1.rho) * p_transform(h1, p, mu, x) == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("name", ["heisenberg:1", "abelian:2"])
def test_translation_covariance(name):
    g = make_group(name)
    p = calibrate(g, 1.0)
    rng = np.random.default_rng(8)
    mu = density_measure(g, "gaussian:0.6") + atom(random_point(g, rng, 0.3), 0.7)
    n1, n = random_point(g, rng, 0.5), random_point(g, rng, 0.5)
    moved = mu.translate(g, n1)
    n1n = NPoint(*g.mul(n1.X, n1.Z, n.X, n.Z))
    for a in (0.05, 0.5):
        v = q_transform(g, p, mu, SPoint(n, a))
        assert q_transform(g, p, moved, SPoint(n1n, a)) == pytest.approx(v, rel=1e-5)


def test_heaviside_scale_invariance(ab1):
    p = calibrate(ab1, 0.8)
    mu = density_measure(ab1, "heaviside_x1")
    vals = [q_transform(ab1, p, mu, SPoint(NPoint([0.7 * y], []), y)) for y in (1e-4, 0.1, 10.0)]
    assert max(abs(v - vals[0]) for v in vals) < 1e-10


def test_strict_mode_raises():
    g = make_group("heisenberg:1")
    p = calibrate(g, 1.0)
    quad = QuadratureSpec(rel_tol=1e-12, max_evals=20_000)
    with pytest.raises(QuadratureError):
        q_transform(g, p, density_measure(g, "heaviside_x1"), SPoint(g.identity(), 1.0), quad,
                    strict=True)
    est = q_transform_estimate(g, p, density_measure(g, "heaviside_x1"), SPoint(g.identity(), 1.0), quad)
    assert est.error > 0


def _growing(g, power):
    f = lambda X, Z: (1 + g.norm(X, Z)) ** power  # noqa: E731
    return BoundaryMeasure((), (Density(f"growth{power}", f),), "growth")


@pytest.mark.parametrize("beta", [0.25, 1.0, 2.0])
def test_finiteness(h1, beta):
    p = calibrate(h1, beta)
    ok, val = finiteness_check(h1, p, haar(h1), 2.0)
    # power counting: (16 + d^2/16)^{-beta-rho} is integrable against d^{Q-1} dd
    assert ok and np.isfinite(val) and val > 0
    assert finiteness_check(h1, p, _growing(h1, 2 * beta + 0.5), 2.0)[0] is False
    assert finiteness_check(h1, p, _growing(h1, 2 * beta - 0.5), 2.0)[0] is True
    ok, val = finiteness_check(h1, p, density_measure(h1, "indicator_ball:3") + atom(h1.identity()), 2.0)
    assert ok and np.isfinite(val)
    with pytest.raises(ValueError):
        finiteness_check(h1, p, haar(h1), 0.5)


def test_finiteness_value_for_haar_abelian(ab1):
    # int (1 + x^2/4)^{-1} dx = 2 pi for beta = 1/2, tau = 1
    p = calibrate(ab1, 0.5)
    ok, val = finiteness_check(ab1, p, haar(ab1), 1.0)
    assert ok and val == pytest.approx(2 * math.pi, rel=1e-3)


def test_tail_integral(h1):
    p = calibrate(h1, 1.0)
    tau = estimate_tau(h1)
    delta = 0.5
    x0 = SPoint(h1.identity(), 0.01)
    assert tail_integral(h1, p, density_measure(h1, "indicator_ball:0.25"), delta, x0, tau=tau) == 0
    assert tail_integral(h1, p, atom(h1.point(X=[0.1, 0])), delta, x0, tau=tau) == 0
    vals = [tail_integral(h1, p, haar(h1), delta, SPoint(h1.identity(), 2.0**-j), tau=tau)
            for j in range(13)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3 * vals[0]
    with pytest.raises(ValueError):
        tail_integral(h1, p, haar(h1), delta, SPoint(h1.point(X=[0.5, 0]), 0.1), tau=tau)
    with pytest.raises(ValueError):
        tail_integral(h1, p, haar(h1), 1.5, x0, tau=tau)


def test_tail_bound_holds_on_fresh_sample(h1):
    p = calibrate(h1, 1.0)
    tau = estimate_tau(h1)
    delta = 0.5
    rad = delta**2 / (2 * tau)

    def sample(seed, count):
        X, Z = sample_unit_ball(h1, count, make_rng(seed))
        return [NPoint(*h1.dil(np.array(0.99 * rad), X[i], Z[i])) for i in range(count)]

    ratios = [tail_integral(h1, p, haar(h1), delta, SPoint(n, 2.0**-j), tau=tau) / 2.0 ** (-2 * j)
              for n in sample(1, 4) for j in range(2, 12, 3)]
    K = max(ratios)
    fresh = [tail_integral(h1, p, haar(h1), delta, SPoint(n, 2.0**-j), tau=tau) / 2.0 ** (-2 * j)
             for n in sample(2, 4) for j in (3, 7, 11)]
    assert max(fresh) <= 1.5 * K


def test_hl_lower_constant(h1):
    p = calibrate(h1, 1.0)
    V = unit_ball_volume(h1)
    c = hl_lower_constant(h1, p, 1.0, 1.0)
    C = 1 + math.sqrt(2)
    assert c == pytest.approx(p.c_beta * V / (16 + 8 * C + C * C) ** 2, rel=1e-14)
    assert hl_lower_constant(h1, p, 1e-12, 2.0) == pytest.approx(p.c_beta * V / (16 + 16 + 4) ** 2)
    vals = [hl_lower_constant(h1, p, a, 1.5) for a in (0.1, 0.5, 1, 2, 5)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[0] <= p.c_beta * V / 16**2 <= 1
    with pytest.raises(ValueError):
        hl_lower_constant(h1, p, 1.0, 0.9)


def _hl_sample(g, count, seed):
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        om = rng.normal(size=g.dim_v)
        ze = rng.normal(size=g.k) if g.k else np.zeros(0)
        out.append((2.0 ** -int(rng.integers(0, 9)), om / np.linalg.norm(om),
                    ze / np.linalg.norm(ze) if g.k else ze, rng.uniform(0, 2 * math.pi)))
    return out


def test_verify_hl_examples(h1):
    p = calibrate(h1, 1.0)
    n0 = h1.point(X=[0.1, 0.0])
    sample = _hl_sample(h1, 6, 3)
    rep = verify_hl(h1, p, haar(h1), n0, 1.0, sample)
    assert rep.violations == 0
    assert all(r["lhs"] == pytest.approx(rep.constant, rel=1e-6) for r in rep.rows)
    assert rep.ratio_b == pytest.approx(1, rel=1e-4)
    rep = verify_hl(h1, p, atom(n0), n0, 1.0, sample)
    assert rep.violations == 0 and rep.maximal_infinite
    rep = verify_hl(h1, p, BoundaryMeasure(), n0, 1.0, sample)
    assert rep.violations == 0 and all(r["lhs"] == r["rhs"] == 0 for r in rep.rows)


def test_verify_hl_atom_scaling(h1):
    # both sides scale like a^{-Q} for an atom at n0
    p = calibrate(h1, 1.0)
    n0 = h1.identity()
    sample = [(2.0**-j, np.array([1.0, 0]), np.array([1.0]), 0.3) for j in range(0, 12, 2)]
    rep = verify_hl(h1, p, atom(n0), n0, 1.0, sample)
    q = [r["rhs"] / r["lhs"] for r in rep.rows]
    assert rep.violations == 0 and np.ptp(q) / q[0] < 1e-10


def test_check_H3(h1):
    p = calibrate(h1, 1.0)
    n0 = h1.identity()
    assert check_H3(h1, p, haar(h1), n0) == (True, 0.0)
    assert check_H3(h1, p, density_measure(h1, "gaussian:1") + atom(h1.point(X=[1, 0])), n0) == (True, 0.0)
    eps = 1e-6
    pair = atom(h1.point(X=[eps, 0]), 1.0) + atom(h1.point(X=[-eps, 0]), -1.0)
    ok, sup = check_H3(h1, p, pair, n0)
    assert not ok and sup > 1e3


def test_check_H3_signed_example(h1):
    p = calibrate(h1, 1.0)
    quad = QuadratureSpec(rel_tol=1e-4)
    mu = haar(h1, -1.0) + density_measure(h1, "indicator_ball:1", 2.0)
    pts = neighborhood_sample(h1, h1.identity(), count=8)
    ok, sup = check_H3(h1, p, mu, h1.identity(), pts, quad)
    assert ok and np.isfinite(sup) and sup < 1.0
