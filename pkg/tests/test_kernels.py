import math

import numpy as np
import pytest
from scipy import integrate

from shflab.errors import ConfigError, DomainError
from shflab.kernels import (
    QuadratureSpec,
    Theta,
    grid_from_blocks,
    heat_kernel,
    j_contour,
    j_integral,
    j_laplace,
    j_sandwich_ratio,
    j_theta,
    j_theta_with_error,
    jfn,
    jint,
    log_corr,
    pair_kernel,
    time_grid,
)


def test_heat_kernel_is_a_probability_density():
    mass, _ = integrate.dblquad(lambda y, x: heat_kernel(0.3, (x, y)), -8, 8, -8, 8)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(DomainError):
        heat_kernel(0.0, (0.0, 0.0))


def test_pair_kernel_matches_its_convolution_form():
    t, x1, x2 = 0.4, np.array([0.3, -0.2]), np.array([-0.5, 0.1])
    conv, _ = integrate.dblquad(
        lambda y, x: heat_kernel(t, x1 - (x, y)) * heat_kernel(t, x2 - (x, y)), -8, 8, -8, 8
    )
    assert pair_kernel(t, x1, x2) == pytest.approx(4 * math.pi * t * conv, rel=1e-7)


def test_log_corr():
    assert log_corr((0, 0), (0, 0)) == math.inf
    assert log_corr((0, 0), (3, 4)) == 0.0
    assert log_corr((0, 0), (0.1, 0)) == pytest.approx(math.log(10))


@pytest.mark.parametrize("theta", [-3.0, 0.0, 2.0])
@pytest.mark.parametrize("t", [1e-10, 1e-4, 0.1, 1.0])
def test_j_adaptive_matches_inverse_laplace(theta, t):
    assert j_theta(theta, t) == pytest.approx(j_contour(theta, t), rel=1e-9)


def test_vectorized_j_matches_adaptive():
    t = np.logspace(-30, 0, 25)
    for theta in (-5.0, 0.0, 1.5):
        ref = np.array([j_theta(theta, s) for s in t])
        np.testing.assert_allclose(jfn(theta, t), ref, rtol=1e-10)
        iref = np.array([j_integral(theta, s) for s in t])
        np.testing.assert_allclose(jint(theta, t), iref, rtol=1e-10)


def test_j_integral_is_primitive_of_j():
    theta, a, b = 0.5, 0.01, 0.7
    direct, _ = integrate.quad(lambda s: j_theta(theta, s), a, b, epsabs=0, epsrel=1e-11)
    assert j_integral(theta, b) - j_integral(theta, a) == pytest.approx(direct, rel=1e-9)


@pytest.mark.parametrize("theta,p", [(0.0, 10.0), (-1.0, 3.0), (1.0, 5.0)])
def test_laplace_transform_identity(theta, p):
    assert j_laplace(theta, p) == pytest.approx(1.0 / (math.log(p) - theta), rel=1e-8)


def test_j_domain_and_theta_band():
    with pytest.raises(DomainError):
        j_theta(0.0, 0.0)
    with pytest.raises(DomainError):
        j_theta(0.0, 1.5)
    with pytest.raises(DomainError):
        Theta(2.0, c0=1.0)
    assert j_theta(Theta(0.5, c0=1.0), 0.1) == pytest.approx(j_theta(0.5, 0.1))
    with pytest.raises(ConfigError):
        QuadratureSpec(rel_tol=0.0)


def test_j_with_error_estimate():
    j, err = j_theta_with_error(0.0, 1e-3)
    assert j == pytest.approx(j_theta(0.0, 1e-3))
    assert 0 <= err < 1e-8 * j


def test_sandwich_ratio_tends_to_one():
    ts = (1e-4, 1e-8, 1e-16, 1e-32, 1e-64)
    dev = [abs(j_sandwich_ratio(0.0, t) - 1) for t in ts]
    assert all(a > b for a, b in zip(dev, dev[1:]))
    # 1/Γ(a) = a + γa² + ... gives a leading correction 2γ/κ with κ = log 1/t
    kappa = -math.log(ts[-1])
    assert dev[-1] * kappa == pytest.approx(2 * np.euler_gamma, rel=0.05)


def test_time_grid():
    g = time_grid(1e-6, 0.1, ell=2)
    assert g.N == 6
    assert g.t(0) == pytest.approx(1e-12)
    assert g.t(6) == pytest.approx(1.0)
    assert g.log_t_inv(3) == pytest.approx(-math.log(g.t(3)))
    assert grid_from_blocks(0.25, 5).N == 5
    with pytest.raises(ConfigError):
        time_grid(1e-2, 0.1, ell=3)
    with pytest.raises(DomainError):
        time_grid(1e-2, 0.7)
