import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narlab.diffops import (FDScheme, StepUnderflow, a_derivative, apply_L, apply_L_beta,
                            eigen_residual, harmonic_residual)
from narlab.htype import NPoint, SPoint, make_group
from narlab.kernels import calibrate, q_values
from narlab.measures import atom, haar
from narlab.transform import p_transform

from conftest import GROUPS, random_point


def points(g, count, seed):
    rng = np.random.default_rng(seed)
    return [SPoint(random_point(g, rng, 0.5), float(np.exp(rng.uniform(-3, 1)))) for _ in range(count)]


def q_section(g, param, n0):
    def u(x):
        X, Z = g.mul(-n0.X, -n0.Z, x.n.X, x.n.Z)
        return x.a ** (g.rho - param.beta) * q_values(g, param, x.a, X, Z)
    return u


def test_scheme_validation():
    with pytest.raises(ValueError):
        FDScheme(order=3)
    with pytest.raises(ValueError):
        FDScheme(step=0.0)


@pytest.mark.parametrize("name", GROUPS)
@pytest.mark.parametrize("s", [0.0, 0.5, 1.7, -1.2, 3.0])
def test_monomials(name, s):
    g = make_group(name)
    for x in points(g, 3, 1):
        exact = (s * s - g.Q * s) * x.a**s
        assert abs(apply_L(g, lambda y: y.a**s, x) - exact) <= 1e-8 * max(1, abs(x.a**s))


@pytest.mark.parametrize("name", GROUPS)
def test_eigenfunction_powers(name):
    g = make_group(name)
    beta = 0.8
    for s in (g.rho + beta, g.rho - beta):
        assert eigen_residual(g, beta, lambda x: x.a**s, points(g, 4, 2)) < 1e-6


def test_constants_annihilated(h1):
    for x in points(h1, 3, 3):
        assert abs(apply_L(h1, lambda y: 1.0, x)) < 1e-10
        assert abs(apply_L_beta(h1, 0.7, lambda y: 1.0, x)) < 1e-10


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
def test_a_two_beta_is_L_beta_harmonic(h1, beta):
    assert harmonic_residual(h1, beta, lambda x: x.a ** (2 * beta), points(h1, 4, 4)) < 1e-9


@pytest.mark.parametrize("name", GROUPS)
def test_q_kernel_sections(name):
    g = make_group(name)
    param = calibrate(g, 0.6)
    n0 = random_point(g, np.random.default_rng(5), 0.3)
    u = q_section(g, param, n0)
    pts = points(g, 5, 6)
    assert eigen_residual(g, 0.6, u, pts) < 1e-3
    assert eigen_residual(g, 0.6, u, pts, via="L_beta") < 1e-3

    def q(x):
        X, Z = g.mul(-n0.X, -n0.Z, x.n.X, x.n.Z)
        return q_values(g, param, x.a, X, Z)

    assert harmonic_residual(g, 0.6, q, pts) < 1e-3


def test_negative_control(h1):
    assert eigen_residual(h1, 0.4, lambda x: x.a, points(h1, 3, 7)) > 0.1


def test_transform_eigenfunctions(h1):
    param = calibrate(h1, 1.0)
    pts = points(h1, 2, 8)
    assert eigen_residual(h1, 1.0, lambda x: p_transform(h1, param, haar(h1), x), pts) < 1e-3
    delta = atom(h1.identity())
    u = lambda x: x.a ** (h1.rho + 1.0) + p_transform(h1, param, delta, x)  # noqa: E731
    assert eigen_residual(h1, 1.0, u, pts) < 1e-3


@settings(max_examples=10)
@given(st.integers(0, 10**6), st.floats(0.2, 2.0))
def test_L_beta_minus_L(seed, beta):
    g = make_group("heisenberg:1")
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4)

    def u(x):
        X, Z = x.n.X, x.n.Z
        return np.sin(c[0] * X[0] + c[1] * X[1]) * np.cos(c[2] * Z[0]) * x.a ** c[3]

    x = SPoint(random_point(g, rng, 0.5), float(np.exp(rng.uniform(-1, 1))))
    diff = apply_L_beta(g, beta, u, x) - apply_L(g, u, x)
    expect = 2 * (g.rho - beta) * a_derivative(g, u, x)
    assert abs(diff - expect) < 1e-6 * max(1, abs(expect))


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_dilation_stability(h1, r):
    param = calibrate(h1, 0.9)
    n0 = h1.point(X=[0.2, 0.1], Z=[0.05])

    def F(x):
        X, Z = h1.mul(-n0.X, -n0.Z, x.n.X, x.n.Z)
        return q_values(h1, param, x.a, X, Z)

    def Fr(x):
        X, Z = h1.dil(np.array(r), x.n.X, x.n.Z)
        return F(SPoint(NPoint(X, Z), r * x.a))

    pts = points(h1, 4, 9)
    eps = harmonic_residual(h1, 0.9, F, pts)
    back = [SPoint(NPoint(*h1.dil(np.array(1 / r), x.n.X, x.n.Z)), x.a / r) for x in pts]
    assert harmonic_residual(h1, 0.9, Fr, back) < 10 * eps + 1e-9


def test_step_underflow(h1):
    with pytest.raises(StepUnderflow):
        apply_L(h1, lambda x: 1.0, SPoint(h1.point(X=[1e20, 0]), 1e-300))
