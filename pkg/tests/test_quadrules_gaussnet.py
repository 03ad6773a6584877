import math

import numpy as np
import pytest
from scipy import integrate

from shflab.errors import DegeneracyError, DomainError
from shflab.gaussnet import GaussianNetwork, eliminate, evaluate_closed, factor_product
from shflab.kernels import heat_kernel, j_integral, jfn, jint
from shflab.quadrules import block_rule, gauss_legendre, j_gauss_rule, tanh_sinh_unit


# --- fixed rules -------------------------------------------------------------


def test_tanh_sinh_integrates_endpoint_singularities():
    x, xc, w = tanh_sinh_unit(0.1)
    assert np.allclose(x + xc, 1.0)
    # nodes stop at x = e^-32, which drops O(e^-16) of the 1/sqrt(x) mass
    assert np.sum(w / np.sqrt(x)) == pytest.approx(2.0, abs=4 * math.exp(-16))
    assert np.sum(w * np.log(xc)) == pytest.approx(-1.0, rel=1e-8)


def test_gauss_legendre_exact_on_polynomials():
    x, w = gauss_legendre(6)
    assert np.sum(w * x**11) == pytest.approx(1 / 12, rel=1e-13)


@pytest.mark.parametrize("theta", [-2.0, 0.0, 3.0])
def test_j_gauss_rule_moments(theta):
    U = 0.3
    u, w = j_gauss_rule(theta, U, 12)
    assert np.all((u > 0) & (u < U)) and np.all(w > 0)
    assert np.sum(w) == pytest.approx(j_integral(theta, U), rel=1e-10)
    ref, _ = integrate.quad(lambda s: s * jfn(theta, s), 0, U, epsrel=1e-12, limit=200)
    assert np.sum(w * u) == pytest.approx(ref, rel=1e-8)


def test_block_rule_total_mass():
    theta, T = 0.5, 0.2
    br = block_rule(theta, T, 14, 0.2)
    assert np.allclose(br.delta + br.u + br.deltap, T)
    # ∫∫ j(s'-s) ds ds' = ∫_0^T j(u)(T-u) du = ∫_0^T J(u) du after integrating by parts
    ref, _ = integrate.quad(lambda u: jint(theta, u), 0, T, epsrel=1e-12, limit=200)
    assert np.sum(br.weight) == pytest.approx(ref, rel=1e-9)
    # singular in delta: ∫ j(u) log(1 + (T-u)/tau) du = ∫ J(u) / (tau + T - u) du
    tau = 1e-6 * T
    f = lambda v: float(jint(theta, T - math.exp(v))) * math.exp(v) / (tau + math.exp(v))
    ref, _ = integrate.quad(f, math.log(T) - 60, math.log(T), epsrel=1e-12, limit=400)
    errs = []
    for h in (0.2, 0.1, 0.05):
        fine = block_rule(theta, T, 14, h)
        errs.append(abs(np.sum(fine.weight / (tau + fine.delta)) / ref - 1))
    assert errs[0] < 1e-4 and errs[1] < 1e-6 and errs[2] < 1e-8


# --- Gaussian networks ---------------------------------------------------------


def _chain(n, var=0.5):
    net = GaussianNetwork()
    vs = [net.add_vertex(i) for i in range(n)]
    net.add_anchor(vs[0], (0.3, -0.1), var)
    for a, b in zip(vs, vs[1:]):
        net.add_edge(a, b, var)
    return net, vs


def test_closed_chain_integrates_to_one():
    net, _ = _chain(6)
    assert evaluate_closed(net) == pytest.approx(1.0, rel=1e-13)


def test_semigroup_from_elimination():
    net, vs = _chain(3, 0.2)
    net.internal[2] = False
    scalar, res = eliminate(net)
    x = np.array([0.7, 0.4])
    got = scalar * factor_product(res, {0: x})
    assert got == pytest.approx(heat_kernel(0.6, x - (0.3, -0.1)), rel=1e-12)


def test_loop_network_against_brute_force():
    # triangle with one anchor: compare to 4d numerical quadrature of the x-coordinates
    net = GaussianNetwork(prefactor=2.0)
    a, b, c = (net.add_vertex() for _ in range(3))
    net.add_anchor(a, (0.0, 0.0), 0.4)
    net.add_anchor(c, (1.0, 0.5), 0.7)
    net.add_edge(a, b, 0.3)
    net.add_edge(b, c, 0.9)
    net.add_edge(a, c, 1.3)
    val = evaluate_closed(net)

    def g1(t, d):
        return math.exp(-d * d / (2 * t)) / math.sqrt(2 * math.pi * t)

    def one_dim(ma, mc):
        f = lambda z, y, x: g1(0.4, x - ma) * g1(0.7, z - mc) * g1(0.3, x - y) * g1(0.9, y - z) * g1(1.3, x - z)
        return integrate.tplquad(f, -7, 8, -7, 8, -7, 8, epsabs=1e-12)[0]

    assert val == pytest.approx(2.0 * one_dim(0.0, 1.0) * one_dim(0.0, 0.5), rel=1e-7)


def test_diffusive_scaling_exponent():
    # variances times s and means times sqrt(s): each 2d factor gives 1/s and
    # each integrated vertex gives s, so the value scales as s^(vertices - factors)
    def triangle(s):
        net = GaussianNetwork()
        a, b, c = (net.add_vertex() for _ in range(3))
        net.add_anchor(a, (0.0, 0.0), 0.4 * s)
        net.add_anchor(c, (math.sqrt(s), 0.5 * math.sqrt(s)), 0.7 * s)
        net.add_edge(a, b, 0.3 * s)
        net.add_edge(b, c, 0.9 * s)
        net.add_edge(a, c, 1.3 * s)
        return evaluate_closed(net)

    for s in (1e-3, 7.0):
        assert triangle(s) == pytest.approx(s ** (3 - 5) * triangle(1.0), rel=1e-12)


def test_batched_variances():
    net = GaussianNetwork()
    x = net.add_vertex()
    y = net.add_vertex()
    t = np.array([0.1, 1.0, 10.0])
    net.add_anchor(x, (0.0, 0.0), t)
    net.add_edge(x, y, 2 * t)
    np.testing.assert_allclose(evaluate_closed(net), 1.0, rtol=1e-13)


def test_wide_variance_range_stays_accurate():
    net = GaussianNetwork()
    x, y = net.add_vertex(), net.add_vertex()
    net.add_anchor(x, (0.0, 0.0), 1e-30)
    net.add_anchor(y, (0.0, 0.0), 1e-30)
    net.add_edge(x, y, 1e30)
    assert evaluate_closed(net) == pytest.approx(heat_kernel(1e30 + 2e-30, (0.0, 0.0)), rel=1e-12)


def test_degeneracy_is_reported():
    net = GaussianNetwork()
    a, b = net.add_vertex("a"), net.add_vertex("b")
    net.add_edge(a, b, 1.0)
    with pytest.raises(DegeneracyError) as exc:
        evaluate_closed(net)
    assert set(exc.value.vertices) == {"a", "b"}


def test_network_validation():
    net = GaussianNetwork()
    a = net.add_vertex()
    with pytest.raises(DomainError):
        net.add_edge(a, a, 1.0)
    with pytest.raises(DomainError):
        net.add_anchor(a, (0.0, 0.0), -1.0)
    with pytest.raises(DomainError):
        net.add_edge(a, 5, 1.0)
