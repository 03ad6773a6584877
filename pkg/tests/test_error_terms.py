import math

import numpy as np
import pytest

from shflab import error_terms as E
from shflab.errors import CapabilityError, DomainError, PreconditionError
from shflab.kernels import time_grid

GRID = time_grid(1e-8, 0.1, 1)  # N = 8


def test_interval_spec_validation():
    with pytest.raises(DomainError):
        E.IntervalSpec(GRID, 3, 3)
    with pytest.raises(DomainError):
        E.IntervalSpec(GRID, 5, 8)  # n > N - ell
    with pytest.raises(DomainError):
        E.IntervalSpec(GRID, 2, 4, r=0.0)
    I = E.IntervalSpec(GRID, 2, 4, r=math.inf)
    assert not I.finite_r and I.length == 3
    assert I.tau(2) == pytest.approx(GRID.t(2) / GRID.t(4))


def test_surviving_and_assignment():
    assert E.surviving(2, 5, {3, 5}) == [2, 4]
    with pytest.raises(DomainError):
        E.surviving(2, 5, {2})
    a = E.OmegaAssignment(2, 5, frozenset({3}), {2: (1, -1), 4: (-1, -1), 5: (1, 1)})
    assert a.n_tilde == 5 and a.prev(2) is None and a.prev(4) == 2 and a.next(5) == 6
    with pytest.raises(PreconditionError):
        E.OmegaAssignment(2, 5, frozenset(), {2: (1, 1), 3: (1, 1), 4: (1, 1), 5: (1, -1)})
    with pytest.raises(PreconditionError):
        E.OmegaAssignment(2, 5, frozenset(), {2: (1, 1), 3: (1, 1)})


def test_uvw_recursion_by_hand():
    a = E.OmegaAssignment(1, 3, frozenset(), {1: (1, -1), 2: (1, 1), 3: (1, 1)})
    times = {1: (0.1, 0.2), 2: (0.3, 0.5), 3: (0.6, 0.8)}
    u, v, w = E.uvw_iterate(a, times, 2.0)
    X = 0.2
    assert u[1] == pytest.approx(X / 4)
    assert v[1] == pytest.approx(0.3 * X / (4 * 0.3 - X))
    assert w[1] == pytest.approx(0.05)
    assert (u[2], v[2], w[2]) == pytest.approx((0.5, v[1], 0.5))
    b = E.OmegaAssignment(1, 2, frozenset(), {1: (-1, -1), 2: (1, 1)})
    u, v, w = E.uvw_iterate(b, {1: (0.1, 0.2), 2: (0.3, 0.5)}, 2.0)
    assert u[1] == v[1] == w[1] == 0.0 and v[2] == 0.0


@pytest.mark.parametrize("m,n", [(5, 6), (4, 6)])
def test_pointwise_identity_of_the_two_routes(m, n, monkeypatch):
    rng = np.random.default_rng(1)
    I = E.IntervalSpec(GRID, m, n, 0.7)
    for omega in E.omega_subsets(I):
        S = E.surviving(m, n, omega)
        gaps = []
        for i in S:
            T = I.tau(i) - I.tau(i - 1)
            x = rng.dirichlet(np.ones(3), size=16) * T
            gaps.append((x[:, 0], x[:, 1], x[:, 2]))
        b, d = E.pointwise_integrands(I, omega, gaps)
        # the direct route is a signed sum that cancels by up to ~1e7, so the
        # round-off scale is the sum of absolute terms (all signs made positive)
        with monkeypatch.context() as mp:
            mp.setattr(E, "SIGN_CLASSES", tuple((c[0], 1, c[2]) for c in E.SIGN_CLASSES))
            _, scale = E.pointwise_integrands(I, omega, gaps)
        assert np.all(np.abs(b - d) <= 1e-12 * np.abs(scale))


def test_b_sum_equals_direct_at_equal_resolution():
    I = E.IntervalSpec(GRID, 5, 6, 1.0)
    res = E.Resolution(8, 0.4)
    assert E.b_sum(0.0, I, res) == pytest.approx(E.dz_second_moment_direct(0.0, I, res), rel=1e-10)


def test_time_scaling_identity():
    # times scaled by c^2 with θ fixed equal the unscaled value at θ + log c^2, divided by c^2
    g2 = time_grid(2e-8, 0.1, 1)
    a = E.b_omega(0.3, E.IntervalSpec(g2, 5, 6, 1.0), (6,))
    b = E.b_omega(0.3 + 2 * math.log(2), E.IntervalSpec(GRID, 5, 6, 1.0), (6,)) / 4
    assert a == pytest.approx(b, rel=1e-12)


def test_large_r_limit():
    I = E.IntervalSpec(GRID, 5, 6, math.inf)
    lim = E.dz_limit(0.0, I)
    assert E.b_omega(0.0, I, (6,)) == 0.0
    prev = None
    for r in (10.0, 100.0, 1000.0):
        J = E.IntervalSpec(GRID, 5, 6, r)
        dev = abs(E.b_sum(0.0, J) * 4 * math.pi * J.t_n * r * r / lim - 1)
        if prev is not None:
            assert dev < prev / 50  # O(r^-2) approach
        prev = dev
    assert prev < 1e-5


def test_g_majorant_is_positive_and_validated():
    I = E.IntervalSpec(GRID, 4, 6, 1.0)
    res = E.Resolution(8, 0.4)
    for omega in [(), (5,), (6,)]:
        g = E.g_omega_lambda(0.0, I, omega, (), res)
        assert g > 0 and math.isfinite(E.g_bound_shape(I, omega))
    assert E.g_omega_lambda(0.0, I, (), (4,), res) > 0
    with pytest.raises(PreconditionError):
        E.g_omega_lambda(0.0, I, (), (5,), res)
    with pytest.raises(DomainError):
        E.g_omega_lambda(0.0, E.IntervalSpec(GRID, 4, 6, math.inf))


def test_direct_route_capability_limit():
    g = time_grid(1e-10, 0.1, 1)
    with pytest.raises(CapabilityError):
        E.dz_second_moment_direct(0.0, E.IntervalSpec(g, 2, 5, 1.0))


def test_bound_scaling_fits():
    fam = [E.IntervalSpec(time_grid(b**14, b, 1), n - 1, n, math.inf) for b in (0.3, 0.1) for n in (8, 11)]
    out = E.dz_bound_scaling(0.0, fam, E.Resolution(8, 0.4))
    assert len(out["rows"]) == 4
    assert set(out["slope_N"]) == {(0.3, 2), (0.1, 2)}
    assert all(v < 0 for v in out["slope_b"].values())
