import math

import numpy as np
import pytest

from shflab import gmc
from shflab.errors import DomainError, PreconditionError, PSDError


@pytest.fixture
def system():
    return gmc.random_system(np.random.default_rng(4), points=8, a=0.5)


def test_eigenfunctions_are_orthonormal_and_reconstruct_kernel(system):
    lam, U = gmc.eigendecompose(system)
    w = system.mu_phi
    np.testing.assert_allclose(U.T @ (w[:, None] * U), np.eye(len(lam)), atol=1e-10)
    np.testing.assert_allclose((U * lam) @ U.T, system.K, atol=1e-10)
    assert np.all(np.diff(lam) <= 0) and np.all(lam > 0)


def test_extension_to_points_without_weight():
    rng = np.random.default_rng(2)
    s = gmc.random_system(rng, points=6)
    phi = s.phi.copy()
    phi[2] = 0.0
    s0 = gmc.GmcSystem(s.mu, s.K, s.a, phi)
    lam, U = gmc.eigendecompose(s0)
    # the extension satisfies the eigen-equation at the zero-weight point too
    np.testing.assert_allclose(s0.K @ (U * s0.mu_phi[:, None]), U * lam, atol=1e-10)


def test_psd_violation_is_rejected():
    K = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(PSDError):
        gmc.eigendecompose(gmc.GmcSystem(np.ones(2), K, 1.0, np.ones(2)))


def test_system_validation():
    with pytest.raises(DomainError):
        gmc.GmcSystem(np.ones(2), np.array([[1.0, 0.5], [0.4, 1.0]]), 1.0, np.ones(2))
    with pytest.raises(DomainError):
        gmc.GmcSystem(-np.ones(2), np.eye(2), 1.0, np.ones(2))
    with pytest.raises(DomainError):
        gmc.GmcSystem(np.ones(2), np.eye(2), -1.0, np.ones(2))


def test_second_moment_through_eigen_expansion(system):
    lam, _ = gmc.eigendecompose(system)
    assert gmc.second_moment(system, len(lam)) == pytest.approx(gmc.second_moment(system), rel=1e-12)
    assert gmc.second_moment(system, 0) == pytest.approx(system.mass**2, rel=1e-12)


def test_martingale_conditional_expectation(system):
    xi = np.random.default_rng(1).standard_normal(8)
    for n in range(0, 7):
        out = gmc.martingale_check(system, n, xi)
        assert out["error"] < 1e-10 and out["monotone"]
    with pytest.raises(PreconditionError):
        gmc.martingale_check(system, 8, xi)


def test_chaos_mean_and_second_moment_by_sampling(system):
    mean, se = gmc.second_moment_mc(system, 200_000, seed=3)
    assert abs(mean - gmc.second_moment(system)) <= 4 * se
    out = gmc.quench_identity_check([system, gmc.random_system(np.random.default_rng(7))], samples=20_000)
    assert out["second_moment_error"] < 1e-10


def test_tail_bound_shape():
    assert gmc.tail_bound(1.0, 1.5, 0.3, 0.0) == 2.0
    vals = [gmc.tail_bound(0.05, 1.5, 0.3, r) for r in np.linspace(0, 20, 41)]
    assert all(b <= a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-6
    assert gmc.tail_bound(0.0, 1.0, 0.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        gmc.tail_bound(1.0, 1.0, 1.0, -1.0)


def test_rho_functionals_of_constant_kernel():
    s = gmc.GmcSystem(np.ones(3), np.full((3, 3), 0.5), 2.0, np.ones(3))
    rho, rho_p = gmc.rho_functionals(s)
    assert rho == pytest.approx(math.e)
    assert rho_p == pytest.approx(0.5 * math.e)


def test_lower_tail_and_paley_zygmund(system):
    reports = gmc.lower_tail_bound(system, [1, 2, 5], samples=40_000, seed=2)
    assert all(r.ok for r in reports)
    est, bound, sig = gmc.paley_zygmund_check(system, samples=40_000, seed=2)
    assert est >= bound - 4 * sig
